//! Bose-Hubbard superlattice Hamiltonians in the Fock basis.
//!
//! `H = -J sum_j (b†_j b_{j+1} + h.c.) + sum_j [V_j n_j + U/2 n_j (n_j - 1)]`
//! with `V_j = V cos(2 pi beta (j + 1/2) + xi)`, sites numbered from 1.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{FockBasis, ManyBodyState, DEFAULT_CAPACITY};
use crate::format::g12;
use crate::spectral::{self, EigenSystem, HermitianMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Physical parameters of the chain. Energies are in units of the hopping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Hopping `J`.
    #[serde(default = "one")]
    pub hopping: f64,
    /// On-site interaction `U`.
    pub interaction: f64,
    /// Modulation strength `V`.
    pub modulation: f64,
    /// Modulation frequency `beta = p / q`.
    pub p: u32,
    pub q: u32,
    /// Modulation phase `xi` (radians).
    pub phase: f64,
    pub sites: usize,
    pub particles: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

fn one() -> f64 {
    1.0
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ModelParams {
    /// `beta = 1/4`, `xi = -pi/4`, `J = 1`, open chain: the superlattice used
    /// throughout the localization studies.
    pub fn quarter_superlattice(sites: usize, particles: usize, interaction: f64, modulation: f64) -> Self {
        ModelParams {
            hopping: 1.0,
            interaction,
            modulation,
            p: 1,
            q: 4,
            phase: -std::f64::consts::PI / 4.0,
            sites,
            particles,
            boundary: Boundary::Open,
        }
    }

    pub fn beta(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 {
            return Err(Error::InvalidParameter("p and q must be positive".into()));
        }
        if gcd(self.p, self.q) != 1 {
            return Err(Error::InvalidParameter(format!("p = {} and q = {} are not coprime", self.p, self.q)));
        }
        if self.sites == 0 {
            return Err(Error::InvalidParameter("at least one site is required".into()));
        }
        for (name, x) in [
            ("hopping", self.hopping),
            ("interaction", self.interaction),
            ("modulation", self.modulation),
            ("phase", self.phase),
        ] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn with_particles(&self, particles: usize) -> Self {
        ModelParams { particles, ..self.clone() }
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        ModelParams { boundary, ..self.clone() }
    }

    /// `V_j` for site `j` in `1..=L`.
    pub fn onsite_potential(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.sites {
            return Err(Error::InvalidParameter(format!("site {j} outside 1..={}", self.sites)));
        }
        let arg = 2.0 * std::f64::consts::PI * self.beta() * (j as f64 + 0.5) + self.phase;
        Ok(self.modulation * arg.cos())
    }

    /// All on-site potentials, index 0 holding site 1.
    pub fn potentials(&self) -> Vec<f64> {
        (1..=self.sites).map(|j| self.onsite_potential(j).expect("in range")).collect()
    }

    /// Nearest-neighbour bonds (0-based), with the closing bond for periodic chains.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let l = self.sites;
        let mut b: Vec<_> = (0..l.saturating_sub(1)).map(|j| (j, j + 1)).collect();
        if self.boundary == Boundary::Periodic && l > 2 {
            b.push((l - 1, 0));
        }
        b
    }

    pub fn lattice(&self) -> LatticeTerms {
        LatticeTerms {
            potentials: self.potentials(),
            interaction: vec![self.interaction; self.sites],
            bonds: self.bonds().into_iter().map(|(a, b)| (a, b, self.hopping)).collect(),
        }
    }
}

/// Site-resolved one- and two-body terms of a Bose-Hubbard Hamiltonian.
/// A bond `(a, b, t)` contributes `-t (b†_a b_b + h.c.)`.
#[derive(Clone, Debug)]
pub struct LatticeTerms {
    pub potentials: Vec<f64>,
    pub interaction: Vec<f64>,
    pub bonds: Vec<(usize, usize, f64)>,
}

impl LatticeTerms {
    pub fn sites(&self) -> usize {
        self.potentials.len()
    }

    pub fn assemble(&self, basis: &FockBasis) -> SparseHamiltonian {
        let mut h = SparseHamiltonian::new(basis.len());
        let mut occ = Vec::with_capacity(basis.sites());
        for (s, state) in basis.states().iter().enumerate() {
            let n = state.occupations();
            let mut diag = 0.0;
            for (j, &nj) in n.iter().enumerate() {
                let nj = nj as f64;
                diag += self.potentials[j] * nj + 0.5 * self.interaction[j] * nj * (nj - 1.0);
            }
            h.add(s, s, Complex64::new(diag, 0.0));
            for &(a, b, t) in &self.bonds {
                // Both directions visit every connected pair once from each side.
                for (from, to) in [(a, b), (b, a)] {
                    if n[from] == 0 {
                        continue;
                    }
                    occ.clear();
                    occ.extend_from_slice(n);
                    let amp = ((n[to] as f64 + 1.0) * n[from] as f64).sqrt();
                    occ[from] -= 1;
                    occ[to] += 1;
                    let target = basis.index_of_occupations(&occ).expect("particle number conserved");
                    h.add(target, s, Complex64::new(-t * amp, 0.0));
                }
            }
        }
        h
    }
}

/// Matrix elements accumulated as `(row, col) -> value`.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    dim: usize,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl SparseHamiltonian {
    pub fn new(dim: usize) -> Self {
        SparseHamiltonian { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add(&mut self, row: usize, col: usize, v: Complex64) {
        *self.entries.entry((row, col)).or_insert(Complex64::new(0.0, 0.0)) += v;
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn is_real(&self) -> bool {
        self.entries.values().all(|v| v.im == 0.0)
    }

    pub fn to_dense(&self) -> HermitianMatrix {
        if self.is_real() {
            let mut m = Mat::<f64>::zeros(self.dim, self.dim);
            for (r, c, v) in self.entries() {
                m[(r, c)] += v.re;
            }
            HermitianMatrix::Real(m)
        } else {
            let mut m = Mat::<Complex64>::zeros(self.dim, self.dim);
            for (r, c, v) in self.entries() {
                m[(r, c)] += v;
            }
            HermitianMatrix::Complex(m)
        }
    }

    /// Compressed rows for repeated matrix-vector products.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries() {
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { dim: self.dim, row_ptr, cols, vals }
    }
}

/// Row-compressed sparse matrix (entries sorted by row, then column).
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `max |A_ij - conj(A_ji)|` over stored entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                worst = worst.max((self.vals[k] - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let row = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y += alpha * A x`
    pub fn axpy_into(&self, alpha: f64, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] += acc * alpha;
        }
    }
}

/// Dense Hamiltonian together with the basis it acts on.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    pub basis: Arc<FockBasis>,
    pub matrix: HermitianMatrix,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix.get(i, j)
    }

    pub fn diagonalize(&self) -> Result<EigenSystem> {
        spectral::eigh(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        spectral::eigvalsh(&self.matrix)
    }

    /// k-th eigenstate of an eigensystem of this Hamiltonian.
    pub fn eigenstate(&self, eig: &EigenSystem, k: usize) -> ManyBodyState {
        ManyBodyState::new(self.basis.clone(), eig.vector(k))
            .expect("eigenvector length matches basis")
            .with_energy(eig.eigenvalues[k])
    }

    /// `<psi|H|psi>`
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let hv = self.matrix.apply(psi);
        psi.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Nonzero elements as `row,col,value` (or `row,col,re,im` when complex).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let n = self.dim();
        let real = self.matrix.is_real();
        if real {
            writeln!(w, "row,col,value")?;
        } else {
            writeln!(w, "row,col,re,im")?;
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if v.norm() == 0.0 {
                    continue;
                }
                if real {
                    writeln!(w, "{i},{j},{}", g12(v.re))?;
                } else {
                    writeln!(w, "{i},{j},{},{}", g12(v.re), g12(v.im))?;
                }
            }
        }
        Ok(())
    }
}

fn basis_for(params: &ModelParams) -> Result<Arc<FockBasis>> {
    params.validate()?;
    Ok(Arc::new(FockBasis::with_capacity_limit(params.sites, params.particles, DEFAULT_CAPACITY)?))
}

/// Bose-Hubbard Hamiltonian of `params` in the Fock basis.
pub fn build_hamiltonian(params: &ModelParams) -> Result<HamiltonianMatrix> {
    let basis = basis_for(params)?;
    let matrix = params.lattice().assemble(&basis).to_dense();
    Ok(HamiltonianMatrix { basis, matrix })
}

/// Hamiltonian of the particles left behind by one extended boson in `phi`:
/// the potential becomes `V_j + 2U |phi_j|^2`. With `include_pair_breaking`
/// the term `U sum_{i,j} (phi*_i phi_j b†_i b†_j b_j b_j + h.c.)` is added.
/// `params.particles` is the number of remaining particles.
pub fn build_effective_hamiltonian(
    params: &ModelParams,
    phi: &[Complex64],
    include_pair_breaking: bool,
) -> Result<HamiltonianMatrix> {
    if phi.len() != params.sites {
        return Err(Error::DimensionMismatch { expected: params.sites, found: phi.len() });
    }
    let norm: f64 = phi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("extended state has norm {norm}, expected 1")));
    }
    let basis = basis_for(params)?;
    let mut lattice = params.lattice();
    for (v, x) in lattice.potentials.iter_mut().zip(phi) {
        *v += 2.0 * params.interaction * x.norm_sqr();
    }
    let mut h = lattice.assemble(&basis);
    if include_pair_breaking && params.interaction != 0.0 {
        add_pair_breaking(&mut h, &basis, phi, params.interaction);
    }
    Ok(HamiltonianMatrix { basis, matrix: h.to_dense() })
}

/// `U sum_{i,j} (phi*_i phi_j b†_i b†_j b_j b_j + h.c.)`
fn add_pair_breaking(h: &mut SparseHamiltonian, basis: &FockBasis, phi: &[Complex64], u: f64) {
    let l = basis.sites();
    let mut occ = Vec::with_capacity(l);
    for (s, state) in basis.states().iter().enumerate() {
        let n = state.occupations();
        for j in 0..l {
            let nj = n[j] as f64;
            if n[j] < 2 {
                continue;
            }
            for i in 0..l {
                // b†_i b†_j b_j b_j = b†_i n_j b_j: removes one boson from j, adds it at i.
                let coeff = phi[i].conj() * phi[j] * u;
                if coeff == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (amp, target) = if i == j {
                    (nj * (nj - 1.0), s)
                } else {
                    occ.clear();
                    occ.extend_from_slice(n);
                    let amp = ((n[i] as f64 + 1.0) * nj).sqrt() * (nj - 1.0);
                    occ[j] -= 1;
                    occ[i] += 1;
                    (amp, basis.index_of_occupations(&occ).expect("number conserved"))
                };
                h.add(target, s, coeff * amp);
                h.add(s, target, coeff.conj() * amp);
            }
        }
    }
}
