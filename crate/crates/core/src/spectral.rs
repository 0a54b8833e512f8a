//! Dense Hermitian eigendecomposition and thin SVD on top of `faer`.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = Complex64;

/// Dense Hermitian matrix; real symmetric storage is kept whenever possible
/// since it halves memory and quarters the cost of diagonalization.
#[derive(Debug, Clone)]
pub enum HermitianMatrix {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        match self {
            HermitianMatrix::Real(m) => m.nrows(),
            HermitianMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        match self {
            HermitianMatrix::Real(m) => c64::new(m[(i, j)], 0.0),
            HermitianMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, HermitianMatrix::Real(_))
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max(self.get(i, j).norm());
            }
        }
        worst
    }

    /// `max |H - H^dagger|`
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `H v` for a complex vector.
    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.dim();
        let mut out = vec![c64::new(0.0, 0.0); n];
        match self {
            HermitianMatrix::Real(m) => {
                for j in 0..n {
                    let x = v[j];
                    if x == c64::new(0.0, 0.0) {
                        continue;
                    }
                    let col = m.col(j);
                    for i in 0..n {
                        out[i] += x * col[i];
                    }
                }
            }
            HermitianMatrix::Complex(m) => {
                for j in 0..n {
                    let x = v[j];
                    let col = m.col(j);
                    for i in 0..n {
                        out[i] += x * col[i];
                    }
                }
            }
        }
        out
    }
}

/// Eigenvalues ascending with column-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub vectors: EigenVectors,
}

#[derive(Debug, Clone)]
pub enum EigenVectors {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// k-th eigenvector (column k).
    pub fn vector(&self, k: usize) -> Vec<c64> {
        match &self.vectors {
            EigenVectors::Real(m) => m.col(k).iter().map(|&x| c64::new(x, 0.0)).collect(),
            EigenVectors::Complex(m) => m.col(k).iter().copied().collect(),
        }
    }

    /// Coefficients `<v_k|psi>` of `psi` in the eigenbasis.
    pub fn project(&self, psi: &[c64]) -> Vec<c64> {
        match &self.vectors {
            EigenVectors::Real(m) => (0..m.ncols())
                .map(|k| m.col(k).iter().zip(psi).map(|(&a, &b)| b * a).sum())
                .collect(),
            EigenVectors::Complex(m) => (0..m.ncols())
                .map(|k| m.col(k).iter().zip(psi).map(|(a, &b)| a.conj() * b).sum())
                .collect(),
        }
    }

    /// `sum_k v_k a_k`
    pub fn combine(&self, amplitudes: &[c64]) -> Vec<c64> {
        let n = self.len();
        let mut out = vec![c64::new(0.0, 0.0); n];
        for (k, &a) in amplitudes.iter().enumerate() {
            if a == c64::new(0.0, 0.0) {
                continue;
            }
            match &self.vectors {
                EigenVectors::Real(m) => {
                    for (o, &x) in out.iter_mut().zip(m.col(k).iter()) {
                        *o += a * x;
                    }
                }
                EigenVectors::Complex(m) => {
                    for (o, &x) in out.iter_mut().zip(m.col(k).iter()) {
                        *o += a * x;
                    }
                }
            }
        }
        out
    }

    /// Largest residual `||H v_k - lambda_k v_k||_2`.
    pub fn max_residual(&self, h: &HermitianMatrix) -> f64 {
        (0..self.len())
            .map(|k| {
                let v = self.vector(k);
                let hv = h.apply(&v);
                hv.iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b * self.eigenvalues[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |V^dagger V - I|`
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.len();
        let cols: Vec<Vec<c64>> = (0..n).map(|k| self.vector(k)).collect();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let dot: c64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenSystem> {
    let scale = h.max_abs().max(1.0);
    let deviation = h.hermiticity_deviation();
    if deviation > 1e-10 * scale {
        return Err(Error::NonHermitian { deviation });
    }
    match h {
        HermitianMatrix::Real(m) => {
            let evd = m.self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::NonConvergence(format!("{e:?}")))?;
            let eigenvalues = evd.S().column_vector().iter().copied().collect();
            Ok(EigenSystem { eigenvalues, vectors: EigenVectors::Real(evd.U().to_owned()) })
        }
        HermitianMatrix::Complex(m) => {
            let evd = m.self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::NonConvergence(format!("{e:?}")))?;
            let eigenvalues = evd.S().column_vector().iter().map(|x| x.re).collect();
            Ok(EigenSystem { eigenvalues, vectors: EigenVectors::Complex(evd.U().to_owned()) })
        }
    }
}

/// Eigenvalues only.
pub fn eigvalsh(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let scale = h.max_abs().max(1.0);
    let deviation = h.hermiticity_deviation();
    if deviation > 1e-10 * scale {
        return Err(Error::NonHermitian { deviation });
    }
    match h {
        HermitianMatrix::Real(m) => m.self_adjoint_eigenvalues(Side::Lower),
        HermitianMatrix::Complex(m) => m.self_adjoint_eigenvalues(Side::Lower),
    }
    .map_err(|e| Error::NonConvergence(format!("{e:?}")))
}

/// Thin SVD `M = S diag(sigma) W` with `W` holding the right vectors as rows.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub singular_values: Vec<f64>,
    /// Columns are left singular vectors.
    pub left: Mat<c64>,
    /// Rows are (conjugated) right singular vectors.
    pub right: Mat<c64>,
}

impl SvdResult {
    pub fn left_vector(&self, k: usize) -> Vec<c64> {
        self.left.col(k).iter().copied().collect()
    }

    pub fn right_row(&self, k: usize) -> Vec<c64> {
        self.right.row(k).iter().copied().collect()
    }

    /// `S diag(sigma) W` from the first `rank` terms.
    pub fn reconstruct(&self, rank: usize) -> Mat<c64> {
        let (m, n) = (self.left.nrows(), self.right.ncols());
        let mut out = Mat::<c64>::zeros(m, n);
        for k in 0..rank.min(self.singular_values.len()) {
            let s = self.singular_values[k];
            for j in 0..n {
                let w = self.right[(k, j)] * s;
                for i in 0..m {
                    out[(i, j)] += self.left[(i, k)] * w;
                }
            }
        }
        out
    }
}

/// Gauge fix: phase of each left vector chosen so that its largest-magnitude
/// entry is real positive; the matching right row absorbs the inverse phase.
pub fn svd(m: MatRef<'_, c64>) -> Result<SvdResult> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidParameter("non-finite matrix entry".into()));
            }
        }
    }
    let s = m.thin_svd().map_err(|e| Error::NonConvergence(format!("{e:?}")))?;
    let singular_values: Vec<f64> = s.S().column_vector().iter().map(|x| x.re.max(0.0)).collect();
    let mut left = s.U().to_owned();
    let v = s.V();
    let k = singular_values.len();
    let mut right = Mat::<c64>::zeros(k, m.ncols());
    for r in 0..k {
        for j in 0..m.ncols() {
            right[(r, j)] = v[(j, r)].conj();
        }
    }
    for r in 0..k {
        let phase = phase_of_largest(left.col(r).iter().copied());
        if let Some(p) = phase {
            for i in 0..left.nrows() {
                left[(i, r)] *= p.conj();
            }
            for j in 0..right.ncols() {
                right[(r, j)] *= p;
            }
        }
    }
    Ok(SvdResult { singular_values, left, right })
}

/// Unit phase of the largest-magnitude entry.
pub(crate) fn phase_of_largest(v: impl Iterator<Item = c64>) -> Option<c64> {
    let mut best = c64::new(0.0, 0.0);
    for x in v {
        if x.norm() > best.norm() * (1.0 + 1e-12) {
            best = x;
        }
    }
    if best.norm() == 0.0 {
        None
    } else {
        Some(best / best.norm())
    }
}

/// Applies the largest-entry-real-positive gauge to a vector in place.
pub fn fix_phase(v: &mut [c64]) {
    if let Some(p) = phase_of_largest(v.iter().copied()) {
        for x in v.iter_mut() {
            *x *= p.conj();
        }
    }
}
