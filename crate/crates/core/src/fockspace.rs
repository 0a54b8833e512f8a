//! Occupation-number basis for a fixed number of bosons on a chain, and the
//! map between Fock coefficients and the symmetric first-quantized tensor
//! `psi[i1, ..., iN]` over particle positions.
//!
//! Amplitude convention: for an occupation vector `n` whose sorted position
//! tuple is `t`, the Fock coefficient is `c_n = sqrt(N! / prod_j n_j!) * psi[t]`,
//! and every permutation of `t` carries the same tensor value. With this
//! convention the squared norm summed over all ordered tuples equals the
//! squared norm of the Fock vector.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap on the basis size (2^24 states).
pub const DEFAULT_CAPACITY: usize = 1 << 24;

/// Site occupations of one Fock state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState(Box<[u8]>);

impl FockState {
    pub fn new(occupations: Vec<u8>) -> Self {
        FockState(occupations.into_boxed_slice())
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn particles(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    /// Occupied sites repeated by occupation, ascending (the sorted position tuple).
    pub fn positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.particles());
        for (site, &n) in self.0.iter().enumerate() {
            for _ in 0..n {
                out.push(site);
            }
        }
        out
    }

    /// `prod_j n_j!`
    pub fn occupation_factorial(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n as usize)).product()
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of ways to put `particles` bosons on `sites` sites.
pub fn basis_size(sites: usize, particles: usize) -> u128 {
    if sites == 0 {
        return u128::from(particles == 0);
    }
    binomial((sites + particles - 1) as u128, particles as u128)
}

/// All Fock states of `particles` bosons on `sites` sites, in descending
/// lexicographic order of the occupation vector.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        Self::with_capacity_limit(sites, particles, DEFAULT_CAPACITY)
    }

    pub fn with_capacity_limit(sites: usize, particles: usize, cap: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidParameter("a lattice needs at least one site".into()));
        }
        if particles > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!("{particles} particles is too many")));
        }
        let size = basis_size(sites, particles);
        if size > cap as u128 {
            return Err(Error::Capacity { sites, particles, size, cap });
        }
        let mut states = Vec::with_capacity(size as usize);
        let mut current = vec![0u8; sites];
        fill(&mut current, 0, particles, &mut states);
        debug_assert_eq!(states.len() as u128, size);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(FockBasis { sites, particles, states, index })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FockState {
        &self.states[i]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub(crate) fn index_of_occupations(&self, occ: &[u8]) -> Option<usize> {
        // Borrowed lookup without allocating a FockState.
        self.index.get(occ).copied()
    }
}

impl std::borrow::Borrow<[u8]> for FockState {
    fn borrow(&self) -> &[u8] {
        &self.0
    }
}

fn fill(current: &mut [u8], site: usize, remaining: usize, out: &mut Vec<FockState>) {
    if site + 1 == current.len() {
        current[site] = remaining as u8;
        out.push(FockState::new(current.to_vec()));
        current[site] = 0;
        return;
    }
    for n in (0..=remaining).rev() {
        current[site] = n as u8;
        fill(current, site + 1, remaining - n, out);
    }
    current[site] = 0;
}

/// Coefficient vector over a Fock basis.
#[derive(Debug, Clone)]
pub struct ManyBodyState {
    basis: Arc<FockBasis>,
    coefficients: Vec<Complex64>,
    /// Eigenvalue, when the state came out of a diagonalization.
    pub energy: Option<f64>,
}

impl ManyBodyState {
    pub fn new(basis: Arc<FockBasis>, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: coefficients.len() });
        }
        Ok(ManyBodyState { basis, coefficients, energy: None })
    }

    pub fn from_real(basis: Arc<FockBasis>, coefficients: &[f64]) -> Result<Self> {
        Self::new(basis, coefficients.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// The single Fock state `state` with unit amplitude.
    pub fn fock(basis: Arc<FockBasis>, state: &FockState) -> Result<Self> {
        let idx = basis.index_of(state).ok_or_else(|| {
            Error::InvalidParameter(format!("{:?} is not in the basis", state.occupations()))
        })?;
        let mut c = vec![Complex64::new(0.0, 0.0); basis.len()];
        c[idx] = Complex64::new(1.0, 0.0);
        Self::new(basis, c)
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = Some(energy);
        self
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coefficients
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < 1e-10
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroInput("state with zero norm"));
        }
        for c in &mut self.coefficients {
            *c /= n;
        }
        Ok(())
    }

    /// `<self|other>` over the same basis.
    pub fn inner(&self, other: &ManyBodyState) -> Result<Complex64> {
        if self.coefficients.len() != other.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                found: other.coefficients.len(),
            });
        }
        Ok(self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|`
    pub fn fidelity(&self, other: &ManyBodyState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }
}

/// Fully symmetric tensor `psi[i1, ..., iN]` of order N over L sites, stored
/// densely in row-major order (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    order: usize,
    extent: usize,
    values: Vec<Complex64>,
}

impl SymmetricTensor {
    pub fn zeros(order: usize, extent: usize) -> Self {
        let len = extent.pow(order as u32);
        SymmetricTensor { order, extent, values: vec![Complex64::new(0.0, 0.0); len] }
    }

    /// Wraps raw values without checking symmetry; `check_symmetry` reports it.
    pub fn from_values(order: usize, extent: usize, values: Vec<Complex64>) -> Result<Self> {
        let len = extent.pow(order as u32);
        if values.len() != len {
            return Err(Error::DimensionMismatch { expected: len, found: values.len() });
        }
        Ok(SymmetricTensor { order, extent, values })
    }

    /// Rank-1 vector as an order-1 tensor.
    pub fn from_vector(v: &[Complex64]) -> Self {
        SymmetricTensor { order: 1, extent: v.len(), values: v.to_vec() }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.extent + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.values[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let f = self.flat_index(idx);
        self.values[f] = v;
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.extent;
            flat /= self.extent;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroInput("tensor with zero norm"));
        }
        self.scale(Complex64::new(1.0 / n, 0.0));
        Ok(())
    }

    /// Largest deviation `|psi[t] - psi[sort(t)]|` over all index tuples.
    pub fn symmetry_deviation(&self) -> f64 {
        let mut idx = vec![0usize; self.order];
        let mut sorted = vec![0usize; self.order];
        let mut worst: f64 = 0.0;
        for flat in 0..self.values.len() {
            self.multi_index(flat, &mut idx);
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            if sorted != idx {
                worst = worst.max((self.values[flat] - self.get(&sorted)).norm());
            }
        }
        worst
    }

    pub fn check_symmetry(&self, tolerance: f64) -> Result<()> {
        let deviation = self.symmetry_deviation();
        if deviation > tolerance {
            return Err(Error::SymmetryViolation { deviation, tolerance });
        }
        Ok(())
    }

    /// Average over all index permutations.
    pub fn symmetrized(&self) -> SymmetricTensor {
        if self.order < 2 {
            return self.clone();
        }
        let perms = permutations(self.order);
        let mut out = SymmetricTensor::zeros(self.order, self.extent);
        let mut idx = vec![0usize; self.order];
        let mut permuted = vec![0usize; self.order];
        let w = 1.0 / perms.len() as f64;
        for flat in 0..self.values.len() {
            self.multi_index(flat, &mut idx);
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &perms {
                for (slot, &src) in permuted.iter_mut().zip(p) {
                    *slot = idx[src];
                }
                acc += self.get(&permuted);
            }
            out.values[flat] = acc * w;
        }
        out
    }
}

/// All permutations of `0..n` (n ≤ 4 in practice).
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// First-quantized tensor of a Fock-space state.
pub fn tensor_from_vector(state: &ManyBodyState) -> SymmetricTensor {
    let basis = state.basis();
    let n = basis.particles();
    let mut t = SymmetricTensor::zeros(n, basis.sites());
    let n_fact = factorial(n);
    let perms = permutations(n);
    let mut tuple = vec![0usize; n];
    for (fock, &c) in basis.states().iter().zip(state.coefficients()) {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let value = c * (fock.occupation_factorial() / n_fact).sqrt();
        let pos = fock.positions();
        for p in &perms {
            for (slot, &src) in tuple.iter_mut().zip(p) {
                *slot = pos[src];
            }
            t.set(&tuple, value);
        }
    }
    t
}

/// Tolerance on tensor asymmetry accepted by [`vector_from_tensor`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Fock-space state of a symmetric tensor. Errors when the tensor is not
/// symmetric within [`SYMMETRY_TOLERANCE`].
pub fn vector_from_tensor(
    t: &SymmetricTensor,
    basis: &Arc<FockBasis>,
    renormalize: bool,
) -> Result<ManyBodyState> {
    if t.order() != basis.particles() || t.extent() != basis.sites() {
        return Err(Error::DimensionMismatch {
            expected: basis.sites().pow(basis.particles() as u32),
            found: t.values().len(),
        });
    }
    t.check_symmetry(SYMMETRY_TOLERANCE)?;
    let n_fact = factorial(basis.particles());
    let coeffs = basis
        .states()
        .iter()
        .map(|fock| t.get(&fock.positions()) * (n_fact / fock.occupation_factorial()).sqrt())
        .collect();
    let mut state = ManyBodyState::new(basis.clone(), coeffs)?;
    if renormalize {
        state.normalize()?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn two_bosons_on_two_sites() {
        let b = FockBasis::new(2, 2).unwrap();
        let occ: Vec<_> = b.states().iter().map(|s| s.occupations().to_vec()).collect();
        assert_eq!(occ, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
    }

    #[test]
    fn study_scale_sizes() {
        assert_eq!(FockBasis::new(28, 3).unwrap().len(), 4060);
        assert_eq!(FockBasis::new(64, 2).unwrap().len(), 2080);
    }

    #[test]
    fn capacity_cap_is_enforced() {
        let err = FockBasis::with_capacity_limit(28, 3, 4059).unwrap_err();
        assert!(matches!(err, Error::Capacity { size: 4060, .. }));
        assert!(FockBasis::with_capacity_limit(28, 3, 4060).is_ok());
    }

    #[test]
    fn zero_particles_is_one_state() {
        let b = FockBasis::new(5, 0).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.state(0).occupations(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn brute_force_sizes() {
        for l in 1..=6usize {
            for n in 0..=3usize {
                let mut count = 0;
                let total = (n + 1).pow(l as u32);
                for code in 0..total {
                    let mut x = code;
                    let mut sum = 0;
                    for _ in 0..l {
                        sum += x % (n + 1);
                        x /= n + 1;
                    }
                    if sum == n {
                        count += 1;
                    }
                }
                assert_eq!(FockBasis::new(l, n).unwrap().len(), count, "L={l} N={n}");
            }
        }
    }

    #[test]
    fn one_boson_per_site_symmetrizes() {
        let b = Arc::new(FockBasis::new(2, 2).unwrap());
        let s = ManyBodyState::fock(b, &FockState::new(vec![1, 1])).unwrap();
        let t = tensor_from_vector(&s);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t.get(&[0, 1]) - c(r)).norm() < 1e-15);
        assert!((t.get(&[1, 0]) - c(r)).norm() < 1e-15);
        assert_eq!(t.get(&[0, 0]), c(0.0));
        assert_eq!(t.get(&[1, 1]), c(0.0));
    }

    #[test]
    fn doubly_occupied_site() {
        let b = Arc::new(FockBasis::new(2, 2).unwrap());
        let s = ManyBodyState::fock(b, &FockState::new(vec![2, 0])).unwrap();
        let t = tensor_from_vector(&s);
        assert_eq!(t.get(&[0, 0]), c(1.0));
        assert!((t.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fock_states_round_trip() {
        let b = Arc::new(FockBasis::new(4, 3).unwrap());
        for st in b.states() {
            let s = ManyBodyState::fock(b.clone(), st).unwrap();
            let back = vector_from_tensor(&tensor_from_vector(&s), &b, false).unwrap();
            for (x, y) in s.coefficients().iter().zip(back.coefficients()) {
                assert!((x - y).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn asymmetric_tensor_is_rejected() {
        let b = Arc::new(FockBasis::new(3, 2).unwrap());
        let mut t = SymmetricTensor::zeros(2, 3);
        t.set(&[0, 1], c(1.0));
        let err = vector_from_tensor(&t, &b, true).unwrap_err();
        assert!(matches!(err, Error::SymmetryViolation { .. }));
    }

    #[test]
    fn symmetrized_product_is_normalizable() {
        // phi ⊗ chi + chi ⊗ phi with phi ⊥ chi.
        let l = 5;
        let b = Arc::new(FockBasis::new(l, 2).unwrap());
        let phi: Vec<f64> = (0..l).map(|j| if j == 2 { 0.0 } else { 0.5 }).collect();
        let chi: Vec<f64> = (0..l).map(|j| if j == 2 { 1.0 } else { 0.0 }).collect();
        let mut t = SymmetricTensor::zeros(2, l);
        for i in 0..l {
            for j in 0..l {
                t.set(&[i, j], c(phi[i] * chi[j] + phi[j] * chi[i]));
            }
        }
        let s = vector_from_tensor(&t, &b, true).unwrap();
        assert!(s.is_normalized());
        // Norm is preserved by the map before renormalization.
        let raw = vector_from_tensor(&t, &b, false).unwrap();
        assert!((raw.norm() - t.norm()).abs() < 1e-14);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn state_strategy() -> impl Strategy<Value = (usize, usize, Vec<(f64, f64)>)> {
            (1usize..=5, 1usize..=3).prop_flat_map(|(l, n)| {
                let dim = basis_size(l, n) as usize;
                (Just(l), Just(n), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim))
            })
        }

        proptest! {
            #[test]
            fn norm_preserved_and_round_trip((l, n, raw) in state_strategy()) {
                let b = Arc::new(FockBasis::new(l, n).unwrap());
                let coeffs: Vec<_> = raw.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
                let s = ManyBodyState::new(b.clone(), coeffs).unwrap();
                let t = tensor_from_vector(&s);
                prop_assert!(t.symmetry_deviation() == 0.0);
                prop_assert!((t.norm_sqr() - s.norm().powi(2)).abs() < 1e-12);
                let back = vector_from_tensor(&t, &b, false).unwrap();
                for (x, y) in s.coefficients().iter().zip(back.coefficients()) {
                    prop_assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }
}
