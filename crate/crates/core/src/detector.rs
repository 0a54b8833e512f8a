//! Extraction of the extended standing wave `phi` and the localized part `chi`
//! of few-boson eigenstates, `psi ~ sym(phi ⊗ chi)`, and classification of
//! eigenstates into self-localized families.
//!
//! The unfolded state is decomposed by SVD. Inside each dominant left
//! subspace the localized directions are the unit vectors of maximal IPR,
//! which makes the result independent of how a numerically degenerate
//! subspace happens to be rotated.

use std::io::Write;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{tensor_from_vector, vector_from_tensor, FockBasis, ManyBodyState, SymmetricTensor};
use crate::format::g12;
use crate::model::{build_effective_hamiltonian, build_hamiltonian, Boundary, ModelParams};
use crate::observables::{correlations, ipr_tensor, ipr_vector, CorrelationSet};
use crate::spectral::{fix_phase, svd, EigenSystem, SvdResult};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateClass {
    IndependentALL,
    CorrelatedALL,
    OneLocalized,
    /// Self-localized two-boson state: one extended and one localized particle.
    TwoParticleALL,
    NotSelfLocalized,
}

impl StateClass {
    pub fn is_self_localized(self) -> bool {
        !matches!(self, StateClass::NotSelfLocalized)
    }

    pub fn name(self) -> &'static str {
        match self {
            StateClass::IndependentALL => "IndependentALL",
            StateClass::CorrelatedALL => "CorrelatedALL",
            StateClass::OneLocalized => "OneLocalized",
            StateClass::TwoParticleALL => "TwoParticleALL",
            StateClass::NotSelfLocalized => "NotSelfLocalized",
        }
    }
}

/// Screening thresholds. Weights of singular values are `sigma_k^2` of the
/// unit-norm unfolded state, so they sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningThresholds {
    /// Minimum weight carried by the two (three) leading singular values.
    pub sv_sum_min: f64,
    pub extended_overlap_min: f64,
    pub ipr_chi_min_independent: f64,
    pub ipr_chi_min_correlated: f64,
    pub ipr_chi_min_two_particle: f64,
    pub fidelity_min: f64,
    pub ipr_phi_max: f64,
    /// `sigma_1 / sigma_3` bound for "nearly equal" leading values.
    pub near_equal_ratio_max: f64,
    /// `sigma_2 / sigma_3` bound for the two-dominant pattern.
    pub dominance_ratio_min: f64,
    pub one_localized_weight_min: f64,
    pub one_localized_others_max: f64,
    /// Also require the effective-Hamiltonian fidelity of three-particle
    /// candidates to pass `fidelity_min` (two-particle candidates always are).
    pub validate_effective: bool,
    /// Compute the effective-Hamiltonian fidelity for candidates even when it
    /// does not gate.
    pub record_effective: bool,
    pub include_pair_breaking: bool,
    pub exclude_edge_states: bool,
    pub edge_overlap_max: f64,
    pub edge_ipr_min: f64,
    /// Natural orbitals of `chi` below this weight are ignored by the edge test.
    pub natural_orbital_weight_min: f64,
    /// Also reject candidates whose localized density lies in the outer unit
    /// cells beyond `edge_overlap_max` (interaction-bound boundary states).
    pub exclude_boundary_confined: bool,
}

impl Default for ScreeningThresholds {
    fn default() -> Self {
        ScreeningThresholds {
            sv_sum_min: 0.8,
            extended_overlap_min: 0.9,
            ipr_chi_min_independent: 0.4,
            ipr_chi_min_correlated: 0.8,
            ipr_chi_min_two_particle: 0.8,
            fidelity_min: 0.9,
            ipr_phi_max: 0.3,
            near_equal_ratio_max: 1.5,
            dominance_ratio_min: 1.5,
            one_localized_weight_min: 0.8,
            one_localized_others_max: 0.4,
            validate_effective: false,
            record_effective: true,
            include_pair_breaking: false,
            exclude_edge_states: true,
            edge_overlap_max: 0.9,
            edge_ipr_min: 0.4,
            natural_orbital_weight_min: 0.2,
            exclude_boundary_confined: true,
        }
    }
}

impl ScreeningThresholds {
    /// Stricter extended-state bound used for level-statistics ensembles.
    pub fn statistics() -> Self {
        ScreeningThresholds { ipr_phi_max: 0.06, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("sv_sum_min", self.sv_sum_min),
            ("extended_overlap_min", self.extended_overlap_min),
            ("ipr_chi_min_independent", self.ipr_chi_min_independent),
            ("ipr_chi_min_correlated", self.ipr_chi_min_correlated),
            ("ipr_chi_min_two_particle", self.ipr_chi_min_two_particle),
            ("fidelity_min", self.fidelity_min),
            ("ipr_phi_max", self.ipr_phi_max),
            ("one_localized_weight_min", self.one_localized_weight_min),
            ("one_localized_others_max", self.one_localized_others_max),
            ("edge_overlap_max", self.edge_overlap_max),
            ("edge_ipr_min", self.edge_ipr_min),
            ("natural_orbital_weight_min", self.natural_orbital_weight_min),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside (0, 1]")));
            }
        }
        for (name, v) in [
            ("near_equal_ratio_max", self.near_equal_ratio_max),
            ("dominance_ratio_min", self.dominance_ratio_min),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be a finite ratio >= 1")));
            }
        }
        Ok(())
    }
}

/// Intermediate vectors of a three-particle decomposition.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DecompositionTrace {
    /// Rotated left vectors: localized ones first, the extended one last.
    pub s_localized: Vec<Vec<C>>,
    pub s_extended: Vec<C>,
    /// `(mu_l, mu_f)` per localized left vector.
    pub pair_vectors: Vec<(Vec<C>, Vec<C>)>,
    /// Norm of each rotated right row.
    pub row_weights: Vec<f64>,
    /// Leading singular values of each reshaped right row.
    pub row_singular_values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub class: StateClass,
    pub energy: Option<f64>,
    pub phi: Option<Vec<C>>,
    /// Localized `(N-1)`-particle part, unit norm.
    pub chi: Option<SymmetricTensor>,
    /// Leading singular values of the unfolded state (up to four).
    pub singular_values: Vec<f64>,
    pub fidelity_reconstruction: Option<f64>,
    pub fidelity_effective: Option<f64>,
    pub effective_energy: Option<f64>,
    pub ipr_chi: Option<f64>,
    pub ipr_phi: Option<f64>,
    /// Pairwise fidelities among the extended vectors found along the path.
    pub extended_state_overlaps: Vec<f64>,
    /// 1-based sites where `chi` (or the one-body density) peaks.
    pub localized_sites: Vec<usize>,
    /// Other classes whose structural gates also passed.
    pub ties: Vec<StateClass>,
    /// First failing gate of the most structured path tried.
    pub rejected_by: Option<String>,
    pub trace: Option<DecompositionTrace>,
}

impl ClassificationReport {
    fn empty(class: StateClass, energy: Option<f64>) -> Self {
        ClassificationReport {
            class,
            energy,
            phi: None,
            chi: None,
            singular_values: Vec::new(),
            fidelity_reconstruction: None,
            fidelity_effective: None,
            effective_energy: None,
            ipr_chi: None,
            ipr_phi: None,
            extended_state_overlaps: Vec::new(),
            localized_sites: Vec::new(),
            ties: Vec::new(),
            rejected_by: None,
            trace: None,
        }
    }

    fn reject(mut self, gate: impl Into<String>) -> Self {
        self.class = StateClass::NotSelfLocalized;
        self.rejected_by = Some(gate.into());
        self
    }

    /// One JSON object per report.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "energy": self.energy,
            "class": self.class.name(),
            "singular_values": self.singular_values,
            "fidelity_reconstruction": self.fidelity_reconstruction,
            "fidelity_effective": self.fidelity_effective,
            "effective_energy": self.effective_energy,
            "ipr_chi": self.ipr_chi,
            "ipr_phi": self.ipr_phi,
            "extended_state_overlaps": self.extended_state_overlaps,
            "localized_sites": self.localized_sites,
            "ties": self.ties.iter().map(|c| c.name()).collect::<Vec<_>>(),
            "rejected_by": self.rejected_by,
        })
    }
}

pub fn write_reports_jsonl<W: Write>(w: &mut W, reports: &[ClassificationReport]) -> std::io::Result<()> {
    for r in reports {
        writeln!(w, "{}", r.to_json())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Linear-algebra helpers on small dense vectors.

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalized(mut a: Vec<C>) -> Vec<C> {
    let n = norm(&a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    a
}

/// `|<a|b>|` of two vectors after normalization.
pub fn vector_fidelity(a: &[C], b: &[C]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b).norm() / (na * nb)).min(1.0)
}

/// `sum_k coeff_k basis_k`
fn combine(basis: &[Vec<C>], coeff: &[C]) -> Vec<C> {
    let mut v = vec![ZERO; basis[0].len()];
    for (b, &c) in basis.iter().zip(coeff) {
        for (x, y) in v.iter_mut().zip(b) {
            *x += c * y;
        }
    }
    v
}

fn quartic(v: &[C]) -> f64 {
    v.iter().map(|x| x.norm_sqr().powi(2)).sum()
}

/// Unit vector of maximal IPR inside the span of orthonormal `basis`.
/// Returns the coefficients in `basis` and the vector itself.
pub fn max_ipr_in_span(basis: &[Vec<C>]) -> (Vec<C>, Vec<C>) {
    let k = basis.len();
    let l = basis[0].len();
    if k == 1 {
        return (vec![C::new(1.0, 0.0)], basis[0].clone());
    }
    // Seeds: projections of the sites with the largest weight in the span.
    let mut rows: Vec<(usize, f64)> =
        (0..l).map(|i| (i, basis.iter().map(|b| b[i].norm_sqr()).sum())).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut seeds: Vec<Vec<C>> = rows.iter().take(2 * k + 2).map(|&(i, _)| basis.iter().map(|b| b[i].conj()).collect()).collect();
    for j in 0..k {
        let mut e = vec![ZERO; k];
        e[j] = C::new(1.0, 0.0);
        seeds.push(e);
    }
    let mut best: Option<(f64, Vec<C>)> = None;
    for seed in seeds {
        let mut a = normalized(seed);
        if norm(&a) == 0.0 {
            continue;
        }
        let mut f_old = 0.0;
        for _ in 0..500 {
            let v = combine(basis, &a);
            let f = quartic(&v);
            // Gradient of sum |v|^4 projected on the span.
            let g: Vec<C> = v.iter().map(|x| x * x.norm_sqr()).collect();
            let next: Vec<C> = basis.iter().map(|b| dot(b, &g)).collect();
            a = normalized(next);
            if (f - f_old).abs() <= 1e-13 * f {
                break;
            }
            f_old = f;
        }
        let v = combine(basis, &a);
        let f = quartic(&v);
        if best.as_ref().is_none_or(|(b, _)| f > *b * (1.0 + 1e-12)) {
            best = Some((f, a));
        }
    }
    let a = best.expect("at least one seed").1;
    let v = combine(basis, &a);
    (a, v)
}

/// Orthonormal basis of the complement of unit `a` in `C^k`.
fn complement(a: &[C]) -> Vec<Vec<C>> {
    let k = a.len();
    let mut out: Vec<Vec<C>> = Vec::with_capacity(k - 1);
    let mut cand: Vec<(usize, f64)> = (0..k).map(|j| (j, a[j].norm())).collect();
    cand.sort_by(|x, y| x.1.total_cmp(&y.1));
    for (j, _) in cand {
        if out.len() == k - 1 {
            break;
        }
        let mut e = vec![ZERO; k];
        e[j] = C::new(1.0, 0.0);
        for q in std::iter::once(a).chain(out.iter().map(|v| v.as_slice())) {
            let c = dot(q, &e);
            for (x, y) in e.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        let n = norm(&e);
        if n > 1e-8 {
            out.push(e.iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Unitary `R` (as columns) ordering the span of `basis` by successive
/// maximal-IPR directions: `R[0]` is the most localized.
fn localizing_rotation(basis: &[Vec<C>]) -> Vec<Vec<C>> {
    let k = basis.len();
    let mut cols: Vec<Vec<C>> = Vec::with_capacity(k);
    // Orthonormal basis of the remaining subspace in coefficient space.
    let mut remaining: Vec<Vec<C>> = (0..k)
        .map(|j| {
            let mut e = vec![ZERO; k];
            e[j] = C::new(1.0, 0.0);
            e
        })
        .collect();
    while !remaining.is_empty() {
        let sub: Vec<Vec<C>> = remaining.iter().map(|r| combine(basis, r)).collect();
        let (a, _) = max_ipr_in_span(&sub);
        let col = combine(&remaining, &a);
        if remaining.len() > 1 {
            let comp = complement(&a);
            remaining = comp.iter().map(|c| combine(&remaining, c)).collect();
        } else {
            remaining.clear();
        }
        cols.push(col);
    }
    cols
}

fn symmetrize2(m: &[C], l: usize) -> Vec<C> {
    let mut out = vec![ZERO; l * l];
    for i in 0..l {
        for j in 0..l {
            out[i * l + j] = (m[i * l + j] + m[j * l + i]) * 0.5;
        }
    }
    out
}

fn outer_sym(a: &[C], b: &[C]) -> Vec<C> {
    let l = a.len();
    let mut out = vec![ZERO; l * l];
    for i in 0..l {
        for j in 0..l {
            out[i * l + j] = a[i] * b[j] + a[j] * b[i];
        }
    }
    out
}

/// 1-based positions of the largest entries of `v`, highest first.
fn peak_sites(v: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx.truncate(count);
    idx.iter().map(|i| i + 1).collect()
}

fn sigma_weights(s: &[f64]) -> Vec<f64> {
    let total: f64 = s.iter().map(|x| x * x).sum();
    s.iter().map(|x| x * x / total).collect()
}

// ---------------------------------------------------------------------------
// Reconstruction.

/// Coefficients of `b†(phi)|chi>` in the `N`-particle basis, precomputed
/// per `N`-particle Fock state: entries `(site, sqrt(n_site), index of the
/// state with that boson removed)`.
#[derive(Debug)]
pub struct PlacementTable {
    basis: Arc<FockBasis>,
    reduced: Arc<FockBasis>,
    offsets: Vec<usize>,
    entries: Vec<(u32, f64, u32)>,
}

impl PlacementTable {
    pub fn new(basis: Arc<FockBasis>, reduced: Arc<FockBasis>) -> Result<Self> {
        if basis.particles() == 0
            || reduced.particles() + 1 != basis.particles()
            || reduced.sites() != basis.sites()
        {
            return Err(Error::InvalidParameter("reduced basis must hold one particle fewer on the same sites".into()));
        }
        let mut offsets = Vec::with_capacity(basis.len() + 1);
        let mut entries = Vec::new();
        let mut occ = Vec::with_capacity(basis.sites());
        offsets.push(0);
        for st in basis.states() {
            let n = st.occupations();
            for s in 0..n.len() {
                if n[s] == 0 {
                    continue;
                }
                occ.clear();
                occ.extend_from_slice(n);
                occ[s] -= 1;
                let idx = reduced.index_of_occupations(&occ).expect("reduced state exists");
                entries.push((s as u32, (n[s] as f64).sqrt(), idx as u32));
            }
            offsets.push(entries.len());
        }
        Ok(PlacementTable { basis, reduced, offsets, entries })
    }

    pub fn for_state(state: &ManyBodyState) -> Result<Self> {
        let b = state.basis();
        let reduced = Arc::new(FockBasis::new(b.sites(), b.particles() - 1)?);
        Self::new(b.clone(), reduced)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn reduced(&self) -> &Arc<FockBasis> {
        &self.reduced
    }

    /// Unnormalized `b†(phi)|chi>`.
    pub fn apply(&self, phi: &[C], chi: &[C]) -> Vec<C> {
        (0..self.basis.len())
            .map(|t| {
                self.entries[self.offsets[t]..self.offsets[t + 1]]
                    .iter()
                    .map(|&(s, w, r)| phi[s as usize] * chi[r as usize] * w)
                    .sum()
            })
            .collect()
    }

    /// `|<psi|b†(phi) chi>| / ||b†(phi) chi||`, zero for a vanishing result.
    pub fn fidelity(&self, psi: &[C], phi: &[C], chi: &[C]) -> f64 {
        let rec = self.apply(phi, chi);
        let n = norm(&rec);
        if n == 0.0 {
            return 0.0;
        }
        (dot(psi, &rec).norm() / (n * norm(psi))).min(1.0)
    }
}

/// Normalized symmetric product of `phi` with the `(N-1)`-particle tensor `chi`,
/// `psi(t) = sum_p phi_{t_p} chi(t without p)`.
pub fn reconstruct(phi: &[C], chi: &SymmetricTensor) -> Result<ManyBodyState> {
    let l = phi.len();
    if chi.extent() != l {
        return Err(Error::DimensionMismatch { expected: l, found: chi.extent() });
    }
    if phi.iter().chain(chi.values()).any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::InvalidParameter("non-finite input".into()));
    }
    let basis = Arc::new(FockBasis::new(l, chi.order() + 1)?);
    let reduced = Arc::new(FockBasis::new(l, chi.order())?);
    let chi_state = vector_from_tensor(&chi.symmetrized(), &reduced, false)?;
    reconstruct_state(&PlacementTable::new(basis, reduced)?, phi, &chi_state)
}

/// Normalized `b†(phi)|chi>` for a Fock-space `chi`.
pub fn reconstruct_state(table: &PlacementTable, phi: &[C], chi: &ManyBodyState) -> Result<ManyBodyState> {
    if chi.basis().len() != table.reduced.len() {
        return Err(Error::DimensionMismatch { expected: table.reduced.len(), found: chi.basis().len() });
    }
    let rec = table.apply(phi, chi.coefficients());
    let mut s = ManyBodyState::new(table.basis.clone(), rec)?;
    if s.norm() < 1e-14 {
        return Err(Error::ZeroInput("reconstructed state"));
    }
    s.normalize()?;
    Ok(s)
}

/// Best effective-Hamiltonian partner of `phi`.
#[derive(Clone, Debug)]
pub struct RefinedChi {
    pub chi: ManyBodyState,
    pub fidelity: f64,
    pub energy: f64,
}

/// Diagonalizes `H_eff(phi)` and returns the eigenstate whose reconstruction
/// with `phi` has the highest fidelity with `psi`.
pub fn refine_chi(
    psi: &ManyBodyState,
    phi: &[C],
    params: &ModelParams,
    include_pair_breaking: bool,
) -> Result<RefinedChi> {
    let table = PlacementTable::for_state(psi)?;
    refine_chi_with(&table, psi, phi, params, include_pair_breaking)
}

pub fn refine_chi_with(
    table: &PlacementTable,
    psi: &ManyBodyState,
    phi: &[C],
    params: &ModelParams,
    include_pair_breaking: bool,
) -> Result<RefinedChi> {
    let n = psi.basis().particles();
    let phi = normalized(phi.to_vec());
    let heff = build_effective_hamiltonian(&params.with_particles(n - 1), &phi, include_pair_breaking)?;
    let eig = heff.diagonalize()?;
    let (k, fidelity) = (0..eig.len())
        .into_par_iter()
        .map(|k| (k, table.fidelity(psi.coefficients(), &phi, &eig.vector(k))))
        .reduce(|| (0, -1.0), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    Ok(RefinedChi { chi: heff.eigenstate(&eig, k), fidelity, energy: eig.eigenvalues[k] })
}

// ---------------------------------------------------------------------------
// Edge states.

/// Boundary-localized single-particle eigenstates of the open chain.
#[derive(Clone, Debug, Default)]
pub struct EdgeManifold {
    pub states: Vec<Vec<C>>,
    pub energies: Vec<f64>,
}

impl EdgeManifold {
    pub fn new(params: &ModelParams, ipr_min: f64) -> Result<Self> {
        let p = ModelParams { particles: 1, boundary: Boundary::Open, ..params.clone() };
        let h = build_hamiltonian(&p)?;
        let eig = h.diagonalize()?;
        let l = p.sites;
        let cell = (p.q as usize).min(l);
        let mut out = EdgeManifold::default();
        for k in 0..eig.len() {
            let v = eig.vector(k);
            let density: Vec<f64> = v.iter().map(|x| x.norm_sqr()).collect();
            let peak = density.iter().enumerate().fold(0, |b, (i, &d)| if d > density[b] { i } else { b });
            if ipr_vector(&v)? > ipr_min && (peak < cell || peak >= l - cell) {
                out.states.push(v);
                out.energies.push(eig.eigenvalues[k]);
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest fidelity of `v` with an edge state.
    pub fn max_overlap(&self, v: &[C]) -> f64 {
        self.states.iter().map(|e| vector_fidelity(e, v)).fold(0.0, f64::max)
    }

    /// Largest norm of an edge state projected onto span of orthonormal `span`.
    pub fn max_overlap_with_span(&self, span: &[Vec<C>]) -> f64 {
        self.states
            .iter()
            .map(|e| span.iter().map(|s| dot(s, e).norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Whether a self-localized report coincides with a non-interacting edge
    /// configuration: `phi`, or the dominant natural-orbital subspace of `chi`,
    /// overlaps an edge state above `overlap_max`.
    pub fn matches(&self, report: &ClassificationReport, t: &ScreeningThresholds) -> bool {
        if self.is_empty() {
            return false;
        }
        if let Some(phi) = &report.phi {
            if self.max_overlap(phi) > t.edge_overlap_max {
                return true;
            }
        }
        if let Some(chi) = &report.chi {
            let orbitals = natural_orbitals(chi, t.natural_orbital_weight_min);
            if !orbitals.is_empty() && self.max_overlap_with_span(&orbitals) > t.edge_overlap_max {
                return true;
            }
        }
        false
    }
}

/// Orbitals of `chi` carrying at least `weight_min` of its norm. For a
/// vector this is the vector itself.
pub fn natural_orbitals(chi: &SymmetricTensor, weight_min: f64) -> Vec<Vec<C>> {
    let l = chi.extent();
    match chi.order() {
        1 => vec![normalized(chi.values().to_vec())],
        _ => {
            let cols = chi.values().len() / l;
            let m = Mat::<C>::from_fn(l, cols, |i, r| chi.values()[i * cols + r]);
            let Ok(s) = svd(m.as_ref()) else { return Vec::new() };
            let w = sigma_weights(&s.singular_values);
            (0..w.len()).filter(|&k| w[k] >= weight_min).map(|k| s.left_vector(k)).collect()
        }
    }
}

/// Whether 0-based site `j` lies in the first or last unit cell.
fn in_boundary_cell(j: usize, l: usize, q: usize) -> bool {
    j < q || j + q >= l
}

/// Share of the one-body density of `chi` inside the outer unit cells.
pub fn boundary_weight(chi: &SymmetricTensor, q: usize) -> f64 {
    let l = chi.extent();
    let cols = chi.values().len() / l;
    let rho: Vec<f64> =
        (0..l).map(|j| chi.values()[j * cols..(j + 1) * cols].iter().map(|x| x.norm_sqr()).sum()).collect();
    let total: f64 = rho.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    (0..l).filter(|&j| in_boundary_cell(j, l, q)).map(|j| rho[j]).sum::<f64>() / total
}

/// Removes reports that coincide with edge configurations of the open chain.
pub fn exclude_edge_states(
    candidates: Vec<ClassificationReport>,
    params: &ModelParams,
    thresholds: &ScreeningThresholds,
) -> Result<Vec<ClassificationReport>> {
    let edges = EdgeManifold::new(params, thresholds.edge_ipr_min)?;
    Ok(candidates.into_iter().filter(|r| !edges.matches(r, thresholds)).collect())
}

// ---------------------------------------------------------------------------
// Decompositions.

/// Unfolds a symmetric tensor into the `L x L^(N-1)` matrix `psi_{i, r}`.
fn unfold(psi: &SymmetricTensor) -> Mat<C> {
    let l = psi.extent();
    let cols = psi.values().len() / l;
    Mat::<C>::from_fn(l, cols, |i, r| psi.values()[i * cols + r])
}

/// Result of the two-particle decomposition `psi = phi ⊗ chi + chi ⊗ phi`.
#[derive(Clone, Debug)]
pub struct TwoParticleDecomposition {
    pub phi: Vec<C>,
    pub chi: Vec<C>,
    pub singular_values: Vec<f64>,
    /// Share of the norm carried by the two leading singular values.
    pub leading_weight: f64,
    pub ipr_phi: f64,
    pub ipr_chi: f64,
}

/// Splits the leading two-dimensional left subspace of the `L x L` state
/// into its most localized direction (`chi`) and the orthogonal one (`phi`).
pub fn decompose_two_particle(psi: &SymmetricTensor) -> Result<TwoParticleDecomposition> {
    if psi.order() != 2 {
        return Err(Error::InvalidParameter(format!("expected order 2, got {}", psi.order())));
    }
    psi.check_symmetry(crate::fockspace::SYMMETRY_TOLERANCE)?;
    if psi.norm() == 0.0 {
        return Err(Error::ZeroInput("two-particle tensor"));
    }
    let s = svd(unfold(psi).as_ref())?;
    let span: Vec<Vec<C>> = (0..2.min(s.singular_values.len())).map(|k| s.left_vector(k)).collect();
    if span.len() < 2 {
        return Err(Error::InvalidParameter("single-site lattice".into()));
    }
    let rot = localizing_rotation(&span);
    let mut chi = combine(&span, &rot[0]);
    let mut phi = combine(&span, &rot[1]);
    fix_phase(&mut chi);
    fix_phase(&mut phi);
    let (ipr_chi, ipr_phi) = (ipr_vector(&chi)?, ipr_vector(&phi)?);
    if (ipr_chi - ipr_phi).abs() < 1e-6 {
        return Err(Error::AmbiguousAssignment(ipr_chi, ipr_phi));
    }
    Ok(TwoParticleDecomposition {
        phi,
        chi,
        leading_weight: sigma_weights(&s.singular_values).iter().take(2).sum(),
        singular_values: s.singular_values.iter().take(4).copied().collect(),
        ipr_phi,
        ipr_chi,
    })
}

/// Output of the structural part of a three-particle path, before validation.
#[derive(Clone, Debug)]
pub struct ThreeParticleDecomposition {
    pub phi: Vec<C>,
    pub chi: SymmetricTensor,
    pub singular_values: Vec<f64>,
    pub extended_state_overlaps: Vec<f64>,
    pub trace: DecompositionTrace,
}

/// Common engine of the independent (`rank = 3`) and correlated (`rank = 2`)
/// paths: rotate the leading left subspace to localized directions plus one
/// extended direction, split each localized row into `nu ⊗ phi + phi ⊗ nu`
/// and assemble `chi = sum (s ⊗ nu + nu ⊗ s) + w_ll`.
fn decompose_three(psi: &SymmetricTensor, rank: usize) -> Result<ThreeParticleDecomposition> {
    if psi.order() != 3 {
        return Err(Error::InvalidParameter(format!("expected order 3, got {}", psi.order())));
    }
    psi.check_symmetry(crate::fockspace::SYMMETRY_TOLERANCE)?;
    if psi.norm() == 0.0 {
        return Err(Error::ZeroInput("three-particle tensor"));
    }
    let l = psi.extent();
    if l < rank {
        return Err(Error::InvalidParameter(format!("{l} sites cannot hold a rank-{rank} decomposition")));
    }
    let s = svd(unfold(psi).as_ref())?;
    decompose_three_svd(l, &s, rank)
}

fn decompose_three_svd(l: usize, s: &SvdResult, rank: usize) -> Result<ThreeParticleDecomposition> {
    let span: Vec<Vec<C>> = (0..rank).map(|k| s.left_vector(k)).collect();
    // Rows D W of the leading terms.
    let rows: Vec<Vec<C>> =
        (0..rank).map(|k| s.right_row(k).into_iter().map(|x| x * s.singular_values[k]).collect()).collect();
    let rot = localizing_rotation(&span);
    // New left vectors Q R and rows R^H D W.
    let mut lefts: Vec<Vec<C>> = rot.iter().map(|r| combine(&span, r)).collect();
    let mut new_rows: Vec<Vec<C>> = rot
        .iter()
        .map(|r| {
            let conj: Vec<C> = r.iter().map(|x| x.conj()).collect();
            combine(&rows, &conj)
        })
        .collect();
    for (lv, row) in lefts.iter_mut().zip(new_rows.iter_mut()) {
        if let Some(p) = crate::spectral::phase_of_largest(lv.iter().copied()) {
            lv.iter_mut().for_each(|x| *x *= p.conj());
            row.iter_mut().for_each(|x| *x *= p);
        }
    }
    let s_f = lefts[rank - 1].clone();
    let w_ll = new_rows[rank - 1].clone();
    let mut chi = w_ll.clone();
    let mut trace = DecompositionTrace {
        s_localized: lefts[..rank - 1].to_vec(),
        s_extended: s_f.clone(),
        row_weights: new_rows.iter().map(|r| norm(r)).collect(),
        ..Default::default()
    };
    let mut extended = vec![s_f.clone()];
    for a in 0..rank - 1 {
        let x = &new_rows[a];
        let xm = Mat::<C>::from_fn(l, l, |j, k| x[j * l + k]);
        let xs = svd(xm.as_ref())?;
        trace.row_singular_values.push(xs.singular_values.iter().take(3).copied().collect());
        let pair_span: Vec<Vec<C>> = (0..2).map(|k| xs.left_vector(k)).collect();
        let prot = localizing_rotation(&pair_span);
        let mu_l = combine(&pair_span, &prot[0]);
        let mu_f = combine(&pair_span, &prot[1]);
        let t = outer_sym(&mu_l, &mu_f);
        let alpha = dot(&t, x) / dot(&t, &t).re;
        let overlap = dot(&s_f, &mu_f);
        let theta = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C::new(1.0, 0.0) };
        let nu: Vec<C> = mu_l.iter().map(|m| m * alpha * theta).collect();
        let piece = outer_sym(&lefts[a], &nu);
        chi.iter_mut().zip(&piece).for_each(|(c, p)| *c += p);
        extended.push(mu_f.clone());
        trace.pair_vectors.push((mu_l, mu_f));
    }
    let mut overlaps = Vec::new();
    for i in 0..extended.len() {
        for j in i + 1..extended.len() {
            overlaps.push(vector_fidelity(&extended[i], &extended[j]));
        }
    }
    let mut chi_t = SymmetricTensor::from_values(2, l, symmetrize2(&chi, l))?;
    chi_t.normalize()?;
    Ok(ThreeParticleDecomposition {
        phi: s_f,
        chi: chi_t,
        singular_values: s.singular_values.iter().take(4).copied().collect(),
        extended_state_overlaps: overlaps,
        trace,
    })
}

/// Three dominant, nearly equal singular values: two localized bosons on
/// distinct sites plus one extended boson.
pub fn decompose_three_independent(psi: &SymmetricTensor) -> Result<ThreeParticleDecomposition> {
    decompose_three(psi, 3)
}

/// Two dominant singular values: a localized pair plus one extended boson.
pub fn decompose_three_correlated(psi: &SymmetricTensor) -> Result<ThreeParticleDecomposition> {
    decompose_three(psi, 2)
}

/// Probability that site `i` holds exactly one boson.
fn single_occupation_probability(psi: &ManyBodyState, i: usize) -> f64 {
    psi.basis()
        .states()
        .iter()
        .zip(psi.coefficients())
        .filter(|(st, _)| st.occupations()[i] == 1)
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        / psi.norm().powi(2)
}

/// One boson strongly localized at `i_a = argmax C1`: the probability of
/// finding exactly one boson there exceeds `one_localized_weight_min` while
/// every other site has `C1_i < one_localized_others_max`. Returns the site.
pub fn detect_one_localized(psi: &ManyBodyState, t: &ScreeningThresholds) -> Result<Option<usize>> {
    let c = correlations(psi, 1)?;
    let ia = CorrelationSet::argmax(&c.c1);
    if single_occupation_probability(psi, ia) <= t.one_localized_weight_min {
        return Ok(None);
    }
    if c.c1.iter().enumerate().any(|(i, &v)| i != ia && v >= t.one_localized_others_max) {
        return Ok(None);
    }
    Ok(Some(ia))
}

// ---------------------------------------------------------------------------
// Classification.

/// Classifier bound to one set of model parameters. Caches the placement
/// table and the edge manifold shared by all eigenstates of a spectrum.
pub struct Detector {
    pub params: ModelParams,
    pub thresholds: ScreeningThresholds,
    table: PlacementTable,
    edges: EdgeManifold,
}

impl Detector {
    pub fn new(params: &ModelParams, thresholds: &ScreeningThresholds) -> Result<Self> {
        params.validate()?;
        thresholds.validate()?;
        if !(2..=3).contains(&params.particles) {
            return Err(Error::InvalidParameter(format!(
                "classification covers two and three particles, got {}",
                params.particles
            )));
        }
        let basis = Arc::new(FockBasis::new(params.sites, params.particles)?);
        let reduced = Arc::new(FockBasis::new(params.sites, params.particles - 1)?);
        let edges = if thresholds.exclude_edge_states {
            EdgeManifold::new(params, thresholds.edge_ipr_min)?
        } else {
            EdgeManifold::default()
        };
        Ok(Detector {
            params: params.clone(),
            thresholds: thresholds.clone(),
            table: PlacementTable::new(basis, reduced)?,
            edges,
        })
    }

    pub fn edge_manifold(&self) -> &EdgeManifold {
        &self.edges
    }

    /// Name of the exclusion rule a candidate falls under, if any.
    fn excluded(&self, rep: &ClassificationReport) -> Option<&'static str> {
        let t = &self.thresholds;
        if t.exclude_edge_states && self.edges.matches(rep, t) {
            return Some("edge_state");
        }
        if t.exclude_boundary_confined {
            if let Some(chi) = &rep.chi {
                if boundary_weight(chi, self.params.q as usize) > t.edge_overlap_max {
                    return Some("boundary");
                }
            }
        }
        None
    }

    pub fn classify(&self, psi: &ManyBodyState) -> Result<ClassificationReport> {
        let b = psi.basis();
        if b.sites() != self.params.sites || b.particles() != self.params.particles {
            return Err(Error::DimensionMismatch { expected: self.table.basis.len(), found: b.len() });
        }
        if !psi.is_normalized() {
            return Err(Error::InvalidParameter(format!("state norm {} is not 1", psi.norm())));
        }
        match b.particles() {
            2 => self.classify_two(psi),
            _ => self.classify_three(psi),
        }
    }

    /// Fidelity gates. Two-particle candidates are validated against the
    /// effective Hamiltonian; three-particle candidates against their own
    /// reconstruction, with the effective check optional.
    fn validate(&self, psi: &ManyBodyState, report: &mut ClassificationReport) -> Result<bool> {
        let t = &self.thresholds;
        let phi = report.phi.as_ref().expect("phi set");
        let chi = report.chi.as_ref().expect("chi set");
        let chi_state = vector_from_tensor(chi, &self.table.reduced, false)?;
        let rec = self.table.fidelity(psi.coefficients(), phi, chi_state.coefficients());
        report.fidelity_reconstruction = Some(rec);
        let effective_gate = psi.basis().particles() == 2 || t.validate_effective;
        if !effective_gate && rec <= t.fidelity_min {
            return Ok(false);
        }
        if effective_gate || t.record_effective {
            let r = refine_chi_with(&self.table, psi, phi, &self.params, t.include_pair_breaking)?;
            report.fidelity_effective = Some(r.fidelity);
            report.effective_energy = Some(r.energy);
            if effective_gate && r.fidelity <= t.fidelity_min {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn classify_two(&self, psi: &ManyBodyState) -> Result<ClassificationReport> {
        let t = &self.thresholds;
        let mut rep = ClassificationReport::empty(StateClass::TwoParticleALL, psi.energy);
        let d = match decompose_two_particle(&tensor_from_vector(psi)) {
            Ok(d) => d,
            Err(Error::AmbiguousAssignment(a, b)) => {
                return Ok(rep.reject(format!("ambiguous assignment ({a:.6}, {b:.6})")));
            }
            Err(e) => return Err(e),
        };
        rep.singular_values = d.singular_values.clone();
        rep.ipr_chi = Some(d.ipr_chi);
        rep.ipr_phi = Some(d.ipr_phi);
        rep.localized_sites = peak_sites(&d.chi.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>(), 1);
        rep.phi = Some(d.phi.clone());
        rep.chi = Some(SymmetricTensor::from_vector(&d.chi));
        if d.leading_weight <= t.sv_sum_min {
            return Ok(rep.reject("sv_sum"));
        }
        if d.ipr_chi <= t.ipr_chi_min_two_particle {
            return Ok(rep.reject("ipr_chi"));
        }
        if d.ipr_phi >= t.ipr_phi_max {
            return Ok(rep.reject("ipr_phi"));
        }
        if let Some(rule) = self.excluded(&rep) {
            return Ok(rep.reject(rule));
        }
        if !self.validate(psi, &mut rep)? {
            return Ok(rep.reject("fidelity"));
        }
        Ok(rep)
    }

    /// Cheap structural gates of a three-particle path. `Err(gate)` names the
    /// first gate that failed.
    fn structural(&self, d: &ThreeParticleDecomposition, weights: &[f64], class: StateClass) -> std::result::Result<(), &'static str> {
        let t = &self.thresholds;
        let s = &d.singular_values;
        let at = |k: usize| s.get(k).copied().unwrap_or(0.0);
        let ipr_chi = ipr_tensor(&d.chi).unwrap_or(0.0);
        match class {
            StateClass::IndependentALL => {
                if weights.iter().take(3).sum::<f64>() <= t.sv_sum_min {
                    return Err("sv_sum");
                }
                if at(2) == 0.0 || at(0) / at(2) > t.near_equal_ratio_max {
                    return Err("sv_pattern");
                }
                if d.extended_state_overlaps.iter().any(|&f| f <= t.extended_overlap_min) {
                    return Err("extended_overlap");
                }
                if ipr_chi <= t.ipr_chi_min_independent {
                    return Err("ipr_chi");
                }
            }
            StateClass::CorrelatedALL => {
                if weights.iter().take(2).sum::<f64>() <= t.sv_sum_min {
                    return Err("sv_sum");
                }
                if at(1) < t.dominance_ratio_min * at(2) {
                    return Err("sv_pattern");
                }
                if d.extended_state_overlaps.iter().any(|&f| f <= t.extended_overlap_min) {
                    return Err("extended_overlap");
                }
                if ipr_chi <= t.ipr_chi_min_correlated {
                    return Err("ipr_chi");
                }
            }
            _ => unreachable!("structural gates exist for the three-particle paths"),
        }
        Ok(())
    }

    fn classify_three(&self, psi: &ManyBodyState) -> Result<ClassificationReport> {
        let t = &self.thresholds;
        let tensor = tensor_from_vector(psi);
        let full = svd(unfold(&tensor).as_ref())?;
        let weights = sigma_weights(&full.singular_values);

        let mut passed: Vec<(StateClass, ThreeParticleDecomposition)> = Vec::new();
        let mut first_failure: Option<(StateClass, ThreeParticleDecomposition, &'static str)> = None;
        let mut first_failure_gate: Option<(StateClass, &'static str)> = None;
        for class in [StateClass::IndependentALL, StateClass::CorrelatedALL] {
            let rank = if class == StateClass::IndependentALL { 3 } else { 2 };
            if weights.iter().take(rank).sum::<f64>() <= t.sv_sum_min {
                first_failure_gate.get_or_insert((class, "sv_sum"));
                continue;
            }
            let d = decompose_three_svd(tensor.extent(), &full, rank)?;
            match self.structural(&d, &weights, class) {
                Ok(()) => passed.push((class, d)),
                Err(gate) => {
                    if first_failure.is_none() {
                        first_failure = Some((class, d, gate));
                    }
                }
            }
        }
        let one_site = detect_one_localized(psi, t)?;
        let mut tied: Vec<StateClass> = passed.iter().map(|(c, _)| *c).collect();
        if one_site.is_some() {
            tied.push(StateClass::OneLocalized);
        }

        let mut last: Option<ClassificationReport> = None;
        for (class, d) in passed {
            let mut rep = self.report_from(class, psi, d);
            if let Some(rule) = self.excluded(&rep) {
                last.get_or_insert(rep.reject(rule));
                continue;
            }
            if !self.validate(psi, &mut rep)? {
                last.get_or_insert(rep.reject("fidelity"));
                continue;
            }
            rep.ties = tied.iter().copied().filter(|&c| c != class).collect();
            return Ok(rep);
        }
        if let Some(site) = one_site {
            let mut rep = ClassificationReport::empty(StateClass::OneLocalized, psi.energy);
            rep.singular_values = full.singular_values.iter().take(4).copied().collect();
            rep.localized_sites = vec![site + 1];
            rep.ties = tied.into_iter().filter(|&c| c != StateClass::OneLocalized).collect();
            let rule = if t.exclude_edge_states && {
                let orbitals: Vec<Vec<C>> = (0..weights.len())
                    .filter(|&k| weights[k] >= t.natural_orbital_weight_min)
                    .map(|k| full.left_vector(k))
                    .collect();
                self.edges.max_overlap_with_span(&orbitals) > t.edge_overlap_max
            } {
                Some("edge_state")
            } else if t.exclude_boundary_confined && in_boundary_cell(site, self.params.sites, self.params.q as usize) {
                Some("boundary")
            } else {
                None
            };
            return Ok(match rule {
                Some(r) => last.unwrap_or(rep).reject(r),
                None => rep,
            });
        }
        if let Some(rep) = last {
            return Ok(rep);
        }
        if let Some((class, d, gate)) = first_failure {
            if first_failure_gate.is_none_or(|(c, _)| c != StateClass::IndependentALL) {
                return Ok(self.report_from(class, psi, d).reject(gate));
            }
        }
        let mut rep = ClassificationReport::empty(StateClass::NotSelfLocalized, psi.energy);
        rep.singular_values = full.singular_values.iter().take(4).copied().collect();
        Ok(rep.reject(first_failure_gate.map_or("sv_sum", |(_, g)| g)))
    }

    fn report_from(&self, class: StateClass, psi: &ManyBodyState, d: ThreeParticleDecomposition) -> ClassificationReport {
        let mut rep = ClassificationReport::empty(class, psi.energy);
        let l = d.chi.extent();
        rep.ipr_chi = ipr_tensor(&d.chi).ok();
        rep.ipr_phi = ipr_vector(&d.phi).ok();
        let dens: Vec<f64> = d.chi.values().iter().map(|x| x.norm_sqr()).collect();
        rep.localized_sites = match class {
            StateClass::IndependentALL => {
                let k = CorrelationSet::argmax(&dens);
                let (i, j) = (k / l, k % l);
                let mut s = vec![i.min(j) + 1, i.max(j) + 1];
                s.dedup();
                s
            }
            _ => {
                let diag: Vec<f64> = (0..l).map(|i| dens[i * l + i]).collect();
                peak_sites(&diag, 1)
            }
        };
        rep.singular_values = d.singular_values;
        rep.extended_state_overlaps = d.extended_state_overlaps;
        rep.phi = Some(d.phi);
        rep.chi = Some(d.chi);
        rep.trace = Some(d.trace);
        rep
    }

    /// Classifies every eigenstate of `eig` (in eigenvalue order).
    pub fn classify_spectrum(&self, h: &crate::model::HamiltonianMatrix, eig: &EigenSystem) -> Result<Vec<ClassificationReport>> {
        (0..eig.len())
            .into_par_iter()
            .map(|k| self.classify(&h.eigenstate(eig, k)))
            .collect()
    }
}

/// Classifies one eigenstate with a freshly built [`Detector`].
pub fn classify(psi: &ManyBodyState, params: &ModelParams, thresholds: &ScreeningThresholds) -> Result<ClassificationReport> {
    Detector::new(params, thresholds)?.classify(psi)
}

// ---------------------------------------------------------------------------
// Fraction scans.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FractionRow {
    pub interaction: f64,
    pub modulation: f64,
    pub phase: f64,
    pub total: usize,
    pub independent: usize,
    pub correlated: usize,
    pub one_localized: usize,
    pub two_particle: usize,
}

impl FractionRow {
    fn frac(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }

    pub fn fraction_independent(&self) -> f64 {
        self.frac(self.independent)
    }

    pub fn fraction_correlated(&self) -> f64 {
        self.frac(self.correlated)
    }

    pub fn fraction_one_localized(&self) -> f64 {
        self.frac(self.one_localized)
    }

    pub fn fraction_two_particle(&self) -> f64 {
        self.frac(self.two_particle)
    }
}

/// Classification counts of the full spectrum at one parameter point.
pub fn fraction_point(params: &ModelParams, thresholds: &ScreeningThresholds) -> Result<FractionRow> {
    let h = build_hamiltonian(params)?;
    let eig = h.diagonalize()?;
    let det = Detector::new(params, thresholds)?;
    let reports = det.classify_spectrum(&h, &eig)?;
    let count = |c: StateClass| reports.iter().filter(|r| r.class == c).count();
    Ok(FractionRow {
        interaction: params.interaction,
        modulation: params.modulation,
        phase: params.phase,
        total: reports.len(),
        independent: count(StateClass::IndependentALL),
        correlated: count(StateClass::CorrelatedALL),
        one_localized: count(StateClass::OneLocalized),
        two_particle: count(StateClass::TwoParticleALL),
    })
}

/// Fractions over a list of parameter points, returned in input order.
pub fn fraction_scan(grid: &[ModelParams], thresholds: &ScreeningThresholds) -> Result<Vec<FractionRow>> {
    for p in grid {
        p.validate()?;
        for x in [p.interaction, p.modulation, p.phase] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter("non-finite grid point".into()));
            }
        }
    }
    grid.par_iter().map(|p| fraction_point(p, thresholds)).collect()
}

/// `(U, V)` grid around a base parameter set, row-major in `U`.
pub fn uv_grid(base: &ModelParams, interactions: &[f64], modulations: &[f64]) -> Vec<ModelParams> {
    interactions
        .iter()
        .flat_map(|&u| modulations.iter().map(move |&v| ModelParams { interaction: u, modulation: v, ..base.clone() }))
        .collect()
}

pub fn phase_grid(base: &ModelParams, phases: &[f64]) -> Vec<ModelParams> {
    phases.iter().map(|&xi| ModelParams { phase: xi, ..base.clone() }).collect()
}

pub fn write_fractions_csv<W: Write>(w: &mut W, rows: &[FractionRow]) -> std::io::Result<()> {
    writeln!(w, "U,V,xi,total,fraction_independent,fraction_correlated,fraction_one_localized,fraction_two_particle")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            g12(r.interaction),
            g12(r.modulation),
            g12(r.phase),
            r.total,
            g12(r.fraction_independent()),
            g12(r.fraction_correlated()),
            g12(r.fraction_one_localized()),
            g12(r.fraction_two_particle())
        )?;
    }
    Ok(())
}
