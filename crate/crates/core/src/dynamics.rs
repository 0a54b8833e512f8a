//! Loading protocol: a single boson performs a quantum walk in the
//! superlattice, further bosons are then ramped in from auxiliary sites, and
//! the loaded state evolves freely.
//!
//! Time-independent stretches are propagated exactly in the eigenbasis of the
//! Hamiltonian. The ramp is split into steps of length `dt`; each step applies
//! the exponential of the Hamiltonian frozen at the step midpoint, computed by
//! a Lanczos expansion converged to round-off.

use std::io::Write;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{Detector, ScreeningThresholds, StateClass};
use crate::error::{Error, Result};
use crate::fockspace::{FockBasis, FockState, ManyBodyState};
use crate::format::g12;
use crate::model::{CsrMatrix, LatticeTerms, ModelParams};
use crate::spectral::{eigh, EigenSystem, HermitianMatrix};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Tolerated drift of the norm over a full run.
pub const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// One auxiliary site holding two bosons.
    Correlated,
    /// Two auxiliary sites holding one boson each.
    Independent,
}

/// Superlattice with auxiliary sites appended after the last lattice site.
#[derive(Clone, Debug)]
pub struct ExtendedLattice {
    pub base: ModelParams,
    /// Lattice site (1-based) each auxiliary site couples to.
    pub attach_sites: Vec<usize>,
    /// Bosons initially held on each auxiliary site.
    pub aux_bosons: Vec<u8>,
    basis: Arc<FockBasis>,
    lattice: CsrMatrix,
    aux_number: Vec<f64>,
    aux_hopping: CsrMatrix,
}

impl ExtendedLattice {
    /// `base.particles` is ignored; the total number is one walker plus the
    /// auxiliary bosons.
    pub fn new(base: &ModelParams, attach_sites: &[usize], aux_bosons: &[u8]) -> Result<Self> {
        base.validate()?;
        let l = base.sites;
        if attach_sites.is_empty() || attach_sites.len() != aux_bosons.len() {
            return Err(Error::InvalidParameter("one boson count per auxiliary site is required".into()));
        }
        if let Some(&s) = attach_sites.iter().find(|&&s| s == 0 || s > l) {
            return Err(Error::InvalidParameter(format!("attach site {s} outside 1..={l}")));
        }
        let naux = attach_sites.len();
        let particles = 1 + aux_bosons.iter().map(|&n| n as usize).sum::<usize>();
        let basis = Arc::new(FockBasis::new(l + naux, particles)?);

        let mut lat = base.lattice();
        lat.potentials.extend(std::iter::repeat(0.0).take(naux));
        lat.interaction.extend(std::iter::repeat(base.interaction).take(naux));
        let lattice = lat.assemble(&basis).to_csr();

        let hop = LatticeTerms {
            potentials: vec![0.0; l + naux],
            interaction: vec![0.0; l + naux],
            bonds: attach_sites.iter().enumerate().map(|(a, &s)| (l + a, s - 1, 1.0)).collect(),
        };
        let aux_hopping = hop.assemble(&basis).to_csr();
        let aux_number = basis
            .states()
            .iter()
            .map(|s| s.occupations()[l..].iter().map(|&n| n as f64).sum())
            .collect();
        let base = ModelParams { particles, ..base.clone() };
        Ok(ExtendedLattice {
            base,
            attach_sites: attach_sites.to_vec(),
            aux_bosons: aux_bosons.to_vec(),
            basis,
            lattice,
            aux_number,
            aux_hopping,
        })
    }

    pub fn for_kind(base: &ModelParams, kind: ProtocolKind) -> Result<Self> {
        match kind {
            ProtocolKind::Correlated => Self::new(base, &[8], &[2]),
            ProtocolKind::Independent => Self::new(base, &[6, 10], &[1, 1]),
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn lattice_sites(&self) -> usize {
        self.base.sites
    }

    pub fn loaded_bosons(&self) -> usize {
        self.aux_bosons.iter().map(|&n| n as usize).sum()
    }

    /// `H = H_lattice + V_A N_aux + J' K_aux`, with `K_aux` the hopping between
    /// each auxiliary site and its attach site.
    pub fn hamiltonian(&self, va: f64, jp: f64) -> TimeDependentHamiltonian<'_> {
        TimeDependentHamiltonian::frozen(self, va, jp)
    }

    pub fn dense(&self, va: f64, jp: f64) -> HermitianMatrix {
        let n = self.basis.len();
        let mut m = Mat::<f64>::zeros(n, n);
        let mut e = vec![ZERO; n];
        let mut col = vec![ZERO; n];
        for j in 0..n {
            e[j] = C::new(1.0, 0.0);
            self.apply(va, jp, &e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i].re;
            }
            e[j] = ZERO;
        }
        HermitianMatrix::Real(m)
    }

    fn apply(&self, va: f64, jp: f64, x: &[C], y: &mut [C]) {
        self.lattice.apply_into(x, y);
        if jp != 0.0 {
            self.aux_hopping.axpy_into(jp, x, y);
        }
        for ((yi, xi), n) in y.iter_mut().zip(x).zip(&self.aux_number) {
            *yi += xi * (va * n);
        }
    }

    /// One boson on `walk_site` (1-based), the loaded bosons on their auxiliary sites.
    pub fn initial_state(&self, walk_site: usize) -> Result<ManyBodyState> {
        let l = self.lattice_sites();
        if walk_site == 0 || walk_site > l {
            return Err(Error::InvalidParameter(format!("walk start {walk_site} outside 1..={l}")));
        }
        let mut occ = vec![0u8; self.basis.sites()];
        occ[walk_site - 1] = 1;
        occ[l..].copy_from_slice(&self.aux_bosons);
        ManyBodyState::fock(self.basis.clone(), &FockState::new(occ))
    }

    /// `<n_j>` on every site, auxiliary sites last.
    pub fn densities(&self, psi: &[C]) -> Vec<f64> {
        let mut d = vec![0.0; self.basis.sites()];
        for (s, c) in self.basis.states().iter().zip(psi) {
            let p = c.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (dj, &n) in d.iter_mut().zip(s.occupations()) {
                *dj += p * n as f64;
            }
        }
        d
    }

    /// Expected number of bosons left on the auxiliary sites.
    pub fn aux_population(&self, psi: &[C]) -> f64 {
        psi.iter().zip(&self.aux_number).map(|(c, n)| c.norm_sqr() * n).sum()
    }

    /// Component with all auxiliary sites empty, expressed on the bare lattice.
    pub fn lattice_component(&self, psi: &[C]) -> Result<ManyBodyState> {
        let l = self.lattice_sites();
        let target = Arc::new(FockBasis::new(l, self.base.particles)?);
        let mut out = vec![ZERO; target.len()];
        for (s, c) in self.basis.states().iter().zip(psi) {
            let occ = s.occupations();
            if occ[l..].iter().any(|&n| n != 0) {
                continue;
            }
            let k = target.index_of(&FockState::new(occ[..l].to_vec())).expect("same particle number");
            out[k] = *c;
        }
        ManyBodyState::new(target, out)
    }

    /// Share of all bosons found within one site of an attach site.
    pub fn retention(&self, densities: &[f64]) -> f64 {
        let l = self.lattice_sites();
        let near: f64 = (1..=l)
            .filter(|&j| self.attach_sites.iter().any(|&a| j.abs_diff(a) <= 1))
            .map(|j| densities[j - 1])
            .sum();
        near / self.base.particles as f64
    }
}

/// `H(t) = H_lattice + V_A(t) N_aux + J'(t) K_aux`.
pub struct TimeDependentHamiltonian<'a> {
    lattice: &'a ExtendedLattice,
    va: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    jp: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
}

impl<'a> TimeDependentHamiltonian<'a> {
    pub fn new(
        lattice: &'a ExtendedLattice,
        va: impl Fn(f64) -> f64 + Sync + 'a,
        jp: impl Fn(f64) -> f64 + Sync + 'a,
    ) -> Result<Self> {
        for m in [&lattice.lattice, &lattice.aux_hopping] {
            let deviation = m.hermiticity_deviation();
            if deviation > 1e-12 {
                return Err(Error::NonHermitian { deviation });
            }
        }
        Ok(TimeDependentHamiltonian { lattice, va: Box::new(va), jp: Box::new(jp) })
    }

    fn frozen(lattice: &'a ExtendedLattice, va: f64, jp: f64) -> Self {
        TimeDependentHamiltonian { lattice, va: Box::new(move |_| va), jp: Box::new(move |_| jp) }
    }

    pub fn parameters(&self, t: f64) -> (f64, f64) {
        ((self.va)(t), (self.jp)(t))
    }

    pub fn apply(&self, t: f64, x: &[C], y: &mut [C]) {
        let (va, jp) = self.parameters(t);
        self.lattice.apply(va, jp, x, y);
    }

    pub fn dim(&self) -> usize {
        self.lattice.basis.len()
    }

    pub fn expectation(&self, t: f64, psi: &[C]) -> f64 {
        let mut y = vec![ZERO; psi.len()];
        self.apply(t, psi, &mut y);
        psi.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Sampled time series.
#[derive(Clone, Debug, Default)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub final_state: Vec<C>,
}

impl EvolutionRecord {
    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    fn push(&mut self, lattice: &ExtendedLattice, t: f64, psi: &[C]) {
        self.times.push(t);
        self.densities.push(lattice.densities(psi));
        self.norms.push(norm(psi));
    }

    fn append(&mut self, other: EvolutionRecord) {
        // the first sample of a later stage repeats the last one of the earlier
        let skip = usize::from(self.times.last().is_some() && other.times.first() == self.times.last());
        self.times.extend(other.times.into_iter().skip(skip));
        self.densities.extend(other.densities.into_iter().skip(skip));
        self.norms.extend(other.norms.into_iter().skip(skip));
        self.final_state = other.final_state;
    }

    /// `(t, site, density)` rows, sites 1-based with auxiliary sites last.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,site,density")?;
        for (t, d) in self.times.iter().zip(&self.densities) {
            for (j, x) in d.iter().enumerate() {
                writeln!(w, "{},{},{}", g12(*t), j + 1, g12(*x))?;
            }
        }
        Ok(())
    }
}

fn norm(psi: &[C]) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn check_norm(psi: &[C], time: f64) -> Result<()> {
    let drift = (norm(psi) - 1.0).abs();
    if drift > NORM_TOLERANCE || !drift.is_finite() {
        return Err(Error::NormDrift { drift, time });
    }
    Ok(())
}

/// Sample times `t0, t0 + every, ...` with `t1` always included.
fn sample_times(t0: f64, t1: f64, every: f64) -> Vec<f64> {
    let n = ((t1 - t0) / every - 1e-9).ceil().max(0.0) as usize;
    let mut out: Vec<f64> = (0..n).map(|k| t0 + k as f64 * every).collect();
    out.push(t1);
    out
}

/// Exact evolution under a time-independent Hamiltonian with eigensystem `eig`.
pub fn evolve_exact(
    lattice: &ExtendedLattice,
    eig: &EigenSystem,
    psi: &[C],
    t0: f64,
    t1: f64,
    sample_every: f64,
) -> Result<EvolutionRecord> {
    if !(t1 >= t0) {
        return Err(Error::InvalidParameter(format!("end time {t1} precedes start {t0}")));
    }
    let amps = eig.project(psi);
    let mut rec = EvolutionRecord::default();
    let times = sample_times(t0, t1, sample_every);
    let states: Vec<Vec<C>> = times
        .par_iter()
        .map(|&t| {
            let a: Vec<C> = amps
                .iter()
                .zip(&eig.eigenvalues)
                .map(|(c, &e)| c * C::from_polar(1.0, -e * (t - t0)))
                .collect();
            eig.combine(&a)
        })
        .collect();
    for (&t, s) in times.iter().zip(&states) {
        check_norm(s, t)?;
        rec.push(lattice, t, s);
    }
    rec.final_state = states.into_iter().last().expect("at least one sample");
    Ok(rec)
}

/// `exp(-i H tau) psi` by Lanczos with full reorthogonalization, for a unit
/// or near-unit `psi`.
fn krylov_step(apply: impl Fn(&[C], &mut [C]), psi: &[C], tau: f64) -> Result<Vec<C>> {
    const MAX_DIM: usize = 40;
    const TOL: f64 = 1e-15;
    let n = psi.len();
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return Ok(psi.to_vec());
    }
    let mut basis: Vec<Vec<C>> = vec![psi.iter().map(|c| c / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let o: C = v.iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
                for (x, vi) in w.iter_mut().zip(v) {
                    *x -= o * vi;
                }
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let (y, eigvals_ok) = small_exponential(&alpha, &beta, tau);
        if !eigvals_ok {
            return Err(Error::NonConvergence("tridiagonal eigensolver failed".into()));
        }
        let err = b * y[m - 1].norm();
        if err < TOL || b < 1e-14 || m == MAX_DIM.min(n) {
            if err >= 1e-10 && m == MAX_DIM {
                return Err(Error::NonConvergence(format!("Krylov error {err:.2e} after {m} vectors")));
            }
            let mut out = vec![ZERO; n];
            for (v, c) in basis.iter().zip(&y) {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += c * vi * beta0;
                }
            }
            return Ok(out);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// `exp(-i T tau) e_1` for the tridiagonal `T` with diagonal `alpha` and
/// off-diagonal `beta`.
fn small_exponential(alpha: &[f64], beta: &[f64], tau: f64) -> (Vec<C>, bool) {
    let m = alpha.len();
    let mut t = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let Ok(eig) = eigh(&HermitianMatrix::Real(t)) else {
        return (vec![ZERO; m], false);
    };
    let ph: Vec<C> = (0..m)
        .map(|k| {
            let q0 = eig.vector(k)[0];
            q0.conj() * C::from_polar(1.0, -eig.eigenvalues[k] * tau)
        })
        .collect();
    (eig.combine(&ph), true)
}

/// Piecewise-constant propagation from `t0` to `t1`: every step of length `dt`
/// (the last one possibly shorter) applies the exact exponential of `H` frozen
/// at the step midpoint.
pub fn propagate(
    h: &TimeDependentHamiltonian,
    psi: &[C],
    t0: f64,
    t1: f64,
    dt: f64,
    sample_every: f64,
) -> Result<EvolutionRecord> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    if !(t1 >= t0) {
        return Err(Error::InvalidParameter(format!("end time {t1} precedes start {t0}")));
    }
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi.len() });
    }
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let per_sample = ((sample_every / dt).round() as usize).max(1);
    let mut rec = EvolutionRecord::default();
    let mut state = psi.to_vec();
    rec.push(h.lattice, t0, &state);
    for k in 0..steps {
        let a = t0 + k as f64 * dt;
        let b = (t0 + (k + 1) as f64 * dt).min(t1);
        let mid = 0.5 * (a + b);
        state = krylov_step(|x, y| h.apply(mid, x, y), &state, b - a)?;
        if (k + 1) % per_sample == 0 || k + 1 == steps {
            check_norm(&state, b)?;
            rec.push(h.lattice, b, &state);
        }
    }
    rec.final_state = state;
    Ok(rec)
}

/// Step boundaries and controls of the three-stage protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSchedule {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub walk_start_site: usize,
    /// Breakpoints `(t, V_A)` of the piecewise-linear auxiliary potential,
    /// held constant before the first and after the last.
    pub va_points: Vec<(f64, f64)>,
    /// `J'` in the walk, loading and free stages.
    pub j_prime: [f64; 3],
    pub dt: f64,
    pub sample_every: f64,
}

impl Default for ProtocolSchedule {
    fn default() -> Self {
        ProtocolSchedule::correlated()
    }
}

impl ProtocolSchedule {
    pub fn correlated() -> Self {
        ProtocolSchedule {
            t1: 84.0,
            t2: 104.0,
            t3: 184.0,
            walk_start_site: 5,
            va_points: vec![(84.0, 200.0), (88.5, 30.0), (91.5, 12.5), (100.0, 6.0), (104.0, -60.0)],
            j_prime: [0.0, 4.0, 0.0],
            dt: 0.002,
            sample_every: 1.0,
        }
    }

    pub fn independent() -> Self {
        ProtocolSchedule {
            t3: 184.0,
            va_points: vec![(84.0, 200.0), (88.8, 14.0), (92.7, -3.1), (100.3, -16.4), (104.0, -40.0)],
            j_prime: [0.0, 1.5, 0.0],
            ..ProtocolSchedule::correlated()
        }
    }

    pub fn for_kind(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::Correlated => Self::correlated(),
            ProtocolKind::Independent => Self::independent(),
        }
    }

    pub fn with_t3(self, t3: f64) -> Self {
        ProtocolSchedule { t3, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.t1 && self.t1 < self.t2 && self.t2 < self.t3) || !self.t3.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need 0 < T1 < T2 < T3, got {}, {}, {}",
                self.t1, self.t2, self.t3
            )));
        }
        if self.va_points.is_empty() {
            return Err(Error::InvalidParameter("auxiliary potential needs at least one breakpoint".into()));
        }
        if self.va_points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter("auxiliary potential breakpoints must increase in time".into()));
        }
        if self.va_points.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParameter("auxiliary potential breakpoints must be finite".into()));
        }
        if let Some(&(t, _)) = self.va_points.iter().find(|&&(t, _)| t < self.t1 || t > self.t2) {
            return Err(Error::InvalidParameter(format!("breakpoint at t = {t} lies outside the loading stage")));
        }
        if self.j_prime[0] != 0.0 || self.j_prime[2] != 0.0 {
            return Err(Error::InvalidParameter("auxiliary hopping must vanish outside the loading stage".into()));
        }
        if !(self.dt > 0.0) || !(self.sample_every > 0.0) {
            return Err(Error::InvalidParameter("dt and the sampling interval must be positive".into()));
        }
        Ok(())
    }

    pub fn va(&self, t: f64) -> f64 {
        let p = &self.va_points;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((ta, va), (tb, vb)) = (w[0], w[1]);
            if t <= tb {
                return va + (vb - va) * (t - ta) / (tb - ta);
            }
        }
        p[p.len() - 1].1
    }

    pub fn j_prime_at(&self, t: f64) -> f64 {
        if t < self.t1 {
            self.j_prime[0]
        } else if t < self.t2 {
            self.j_prime[1]
        } else {
            self.j_prime[2]
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub record: EvolutionRecord,
    /// Extended-lattice state at `T2`.
    pub state_t2: ManyBodyState,
    /// Share of the auxiliary bosons moved into the lattice by `T2`.
    pub transfer_efficiency: f64,
    /// Share of the bosons within one site of the attach sites at `T3`.
    pub retention: f64,
    /// Relative drift of `<H>` over the walk and the free stage.
    pub energy_drift: f64,
}

impl ProtocolOutcome {
    pub fn norm_drift(&self) -> f64 {
        self.record.max_norm_drift()
    }
}

pub fn run_protocol(lattice: &ExtendedLattice, schedule: &ProtocolSchedule) -> Result<ProtocolOutcome> {
    schedule.validate()?;
    let s = schedule;
    let psi0 = lattice.initial_state(s.walk_start_site)?;
    let mut energy_drift: f64 = 0.0;

    let mut stage = |va: f64, jp: f64, psi: &[C], t0: f64, t1: f64| -> Result<EvolutionRecord> {
        let h = lattice.dense(va, jp);
        let eig = eigh(&h)?;
        let rec = evolve_exact(lattice, &eig, psi, t0, t1, s.sample_every)?;
        let hf = lattice.hamiltonian(va, jp);
        let e0 = hf.expectation(t0, psi);
        let e1 = hf.expectation(t1, &rec.final_state);
        energy_drift = energy_drift.max((e1 - e0).abs() / e0.abs().max(1.0));
        Ok(rec)
    };

    let mut record = stage(s.va(0.0), s.j_prime[0], psi0.coefficients(), 0.0, s.t1)?;
    let ramp = TimeDependentHamiltonian::new(lattice, |t| s.va(t), |t| s.j_prime_at(t))?;
    let loading = propagate(&ramp, &record.final_state, s.t1, s.t2, s.dt, s.sample_every)?;
    record.append(loading);
    let state_t2 = ManyBodyState::new(lattice.basis.clone(), record.final_state.clone())?;
    let free = stage(s.va(s.t2), s.j_prime[2], &record.final_state.clone(), s.t2, s.t3)?;
    record.append(free);

    let transfer_efficiency = 1.0 - lattice.aux_population(state_t2.coefficients()) / lattice.loaded_bosons() as f64;
    let retention = lattice.retention(record.densities.last().expect("sampled"));
    check_norm(&record.final_state, s.t3)?;
    Ok(ProtocolOutcome { record, state_t2, transfer_efficiency, retention, energy_drift })
}

/// Overlap of a state with one eigenstate of the initial Hamiltonian.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectionEntry {
    pub energy: f64,
    pub probability: f64,
    /// Weight of the eigenstate with every auxiliary site empty.
    pub lattice_weight: f64,
    /// Detector label, for eigenstates living on the bare lattice.
    pub class: Option<StateClass>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionTable {
    /// Sorted by decreasing probability.
    pub entries: Vec<ProjectionEntry>,
}

impl ProjectionTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// Probability carried by eigenstates labelled with one of `classes`.
    pub fn weight_on(&self, classes: &[StateClass]) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.class.is_some_and(|c| classes.contains(&c)))
            .map(|e| e.probability)
            .sum()
    }

    /// Probability on independent and correlated self-localized eigenstates.
    pub fn self_localized(&self) -> f64 {
        self.weight_on(&[StateClass::IndependentALL, StateClass::CorrelatedALL])
    }
}

/// Projects `state` onto the eigenstates of the `t = 0` Hamiltonian and labels
/// the bare-lattice ones with the detector. Only eigenstates with probability
/// above `classify_above` are classified.
pub fn project_onto_initial_eigenstates(
    state: &ManyBodyState,
    lattice: &ExtendedLattice,
    schedule: &ProtocolSchedule,
    thresholds: &ScreeningThresholds,
    classify_above: f64,
) -> Result<ProjectionTable> {
    if (state.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidParameter(format!("state norm {} is not 1", state.norm())));
    }
    if state.coefficients().len() != lattice.basis.len() {
        return Err(Error::DimensionMismatch { expected: lattice.basis.len(), found: state.coefficients().len() });
    }
    let eig = eigh(&lattice.dense(schedule.va(0.0), schedule.j_prime[0]))?;
    let amps = eig.project(state.coefficients());
    let detector = Detector::new(&lattice.base, thresholds)?;
    let mut entries = (0..eig.len())
        .into_par_iter()
        .map(|k| -> Result<ProjectionEntry> {
            let probability = amps[k].norm_sqr();
            let v = eig.vector(k);
            let mut bare = lattice.lattice_component(&v)?;
            let lattice_weight = bare.norm().powi(2);
            let class = if lattice_weight > 1.0 - 1e-10 && probability > classify_above {
                bare.normalize()?;
                Some(detector.classify(&bare.with_energy(eig.eigenvalues[k]))?.class)
            } else {
                None
            };
            Ok(ProjectionEntry { energy: eig.eigenvalues[k], probability, lattice_weight, class })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(ProjectionTable { entries })
}
