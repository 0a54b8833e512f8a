//! Normal-ordered density correlations and inverse participation ratios.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fockspace::{ManyBodyState, SymmetricTensor};
use crate::format::g12;

/// `C1_i = <a†_i a_i>`, `C2_ij = <a†_i a†_j a_j a_i>`,
/// `C3_ijk = <a†_i a†_j a†_k a_k a_j a_i>`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationSet {
    pub sites: usize,
    pub c1: Vec<f64>,
    pub c2: Option<Vec<f64>>,
    pub c3: Option<Vec<f64>>,
}

impl CorrelationSet {
    pub fn c1(&self, i: usize) -> f64 {
        self.c1[i]
    }

    pub fn c2(&self, i: usize, j: usize) -> f64 {
        self.c2.as_ref().expect("second order not computed")[i * self.sites + j]
    }

    pub fn c3(&self, i: usize, j: usize, k: usize) -> f64 {
        let l = self.sites;
        self.c3.as_ref().expect("third order not computed")[(i * l + j) * l + k]
    }

    /// Position (0-based) of the largest entry of a flat correlation array.
    pub fn argmax(values: &[f64]) -> usize {
        values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    pub fn c2_peak(&self) -> Option<(usize, usize)> {
        let c2 = self.c2.as_ref()?;
        let k = Self::argmax(c2);
        Some((k / self.sites, k % self.sites))
    }

    pub fn c3_peak(&self) -> Option<(usize, usize, usize)> {
        let c3 = self.c3.as_ref()?;
        let l = self.sites;
        let k = Self::argmax(c3);
        Some((k / (l * l), (k / l) % l, k % l))
    }

    /// `site,value` rows with 1-based sites.
    pub fn write_c1_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "site,value")?;
        for (i, v) in self.c1.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, g12(*v))?;
        }
        Ok(())
    }

    pub fn write_c2_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "i,j,value")?;
        if let Some(c2) = &self.c2 {
            let l = self.sites;
            for i in 0..l {
                for j in 0..l {
                    writeln!(w, "{},{},{}", i + 1, j + 1, g12(c2[i * l + j]))?;
                }
            }
        }
        Ok(())
    }

    pub fn write_c3_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "i,j,k,value")?;
        if let Some(c3) = &self.c3 {
            let l = self.sites;
            for i in 0..l {
                for j in 0..l {
                    for k in 0..l {
                        writeln!(w, "{},{},{},{}", i + 1, j + 1, k + 1, g12(c3[(i * l + j) * l + k]))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn falling(n: u8, m: usize) -> f64 {
    (0..m).map(|k| n as f64 - k as f64).product()
}

/// Product of falling factorials `n_s (n_s - 1) ... ` over the distinct sites of `idx`.
fn normal_ordered(occ: &[u8], idx: &[usize]) -> f64 {
    let mut seen = [usize::MAX; 3];
    let mut out = 1.0;
    for (a, &s) in idx.iter().enumerate() {
        if seen[..a].contains(&s) {
            continue;
        }
        seen[a] = s;
        let mult = idx.iter().filter(|&&t| t == s).count();
        out *= falling(occ[s], mult);
    }
    out
}

/// Correlations up to `max_order` (1..=3), evaluated directly from Fock weights.
pub fn correlations(state: &ManyBodyState, max_order: usize) -> Result<CorrelationSet> {
    let basis = state.basis();
    let (l, n) = (basis.sites(), basis.particles());
    if !(1..=3).contains(&max_order) {
        return Err(Error::InvalidParameter(format!("correlation order {max_order} outside 1..=3")));
    }
    if max_order > n {
        return Err(Error::InvalidParameter(format!(
            "correlation order {max_order} exceeds particle number {n}"
        )));
    }
    let mut c1 = vec![0.0; l];
    let mut c2 = (max_order >= 2).then(|| vec![0.0; l * l]);
    let mut c3 = (max_order >= 3).then(|| vec![0.0; l * l * l]);
    let mut sites = Vec::with_capacity(n);
    for (fs, amp) in basis.states().iter().zip(state.coefficients()) {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let occ = fs.occupations();
        sites.clear();
        sites.extend((0..l).filter(|&j| occ[j] > 0));
        for &i in &sites {
            c1[i] += w * occ[i] as f64;
        }
        if let Some(c2) = c2.as_mut() {
            for &i in &sites {
                for &j in &sites {
                    c2[i * l + j] += w * normal_ordered(occ, &[i, j]);
                }
            }
        }
        if let Some(c3) = c3.as_mut() {
            for &i in &sites {
                for &j in &sites {
                    for &k in &sites {
                        c3[(i * l + j) * l + k] += w * normal_ordered(occ, &[i, j, k]);
                    }
                }
            }
        }
    }
    let norm = state.norm().powi(2);
    if norm == 0.0 {
        return Err(Error::ZeroInput("state"));
    }
    for arr in [Some(&mut c1), c2.as_mut(), c3.as_mut()].into_iter().flatten() {
        arr.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(CorrelationSet { sites: l, c1, c2, c3 })
}

fn ipr(values: impl Iterator<Item = Complex64>) -> Result<f64> {
    let (mut s2, mut s4) = (0.0, 0.0);
    for x in values {
        let p = x.norm_sqr();
        s2 += p;
        s4 += p * p;
    }
    if s2 == 0.0 || !s2.is_finite() {
        return Err(Error::ZeroInput("participation ratio of a vanishing amplitude set"));
    }
    Ok(s4 / (s2 * s2))
}

/// `sum |v_i|^4 / (sum |v_i|^2)^2`
pub fn ipr_vector(v: &[Complex64]) -> Result<f64> {
    ipr(v.iter().copied())
}

/// `sum_ij |chi_ij|^4 / (sum_ij |chi_ij|^2)^2` for an order-2 tensor.
pub fn ipr_two_particle(chi: &SymmetricTensor) -> Result<f64> {
    if chi.order() != 2 {
        return Err(Error::InvalidParameter(format!("expected a two-index tensor, got order {}", chi.order())));
    }
    ipr(chi.values().iter().copied())
}

/// Participation ratio of any tensor, regardless of order.
pub fn ipr_tensor(t: &SymmetricTensor) -> Result<f64> {
    ipr(t.values().iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{tensor_from_vector, FockBasis, FockState};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn random_state(l: usize, n: usize, seed: u64) -> ManyBodyState {
        use rand::{Rng, SeedableRng};
        let basis = Arc::new(FockBasis::new(l, n).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<Complex64> = (0..basis.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut s = ManyBodyState::new(basis, c).unwrap();
        s.normalize().unwrap();
        s
    }

    #[test]
    fn condensed_on_first_site() {
        let basis = Arc::new(FockBasis::new(5, 3).unwrap());
        let s = ManyBodyState::fock(basis, &FockState::new(vec![3, 0, 0, 0, 0])).unwrap();
        let c = correlations(&s, 3).unwrap();
        assert_eq!(c.c1, vec![3.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.c2(0, 0), 6.0);
        assert_eq!(c.c3(0, 0, 0), 6.0);
        assert_eq!(c.c3_peak(), Some((0, 0, 0)));
    }

    #[test]
    fn order_above_particle_number_rejected() {
        let basis = Arc::new(FockBasis::new(4, 2).unwrap());
        let s = ManyBodyState::fock(basis, &FockState::new(vec![1, 1, 0, 0])).unwrap();
        assert!(correlations(&s, 3).is_err());
        assert!(correlations(&s, 2).is_ok());
    }

    #[test]
    fn sum_rules() {
        for (l, n) in [(4, 2), (5, 3), (6, 3)] {
            let s = random_state(l, n, 7 + l as u64);
            let c = correlations(&s, n.min(3)).unwrap();
            let nf = n as f64;
            assert!((c.c1.iter().sum::<f64>() - nf).abs() < 1e-10);
            assert!((c.c2.as_ref().unwrap().iter().sum::<f64>() - nf * (nf - 1.0)).abs() < 1e-10);
            if n == 3 {
                assert!((c.c3.as_ref().unwrap().iter().sum::<f64>() - 6.0).abs() < 1e-10);
                for i in 0..l {
                    for j in 0..l {
                        for k in 0..l {
                            let v = c.c3(i, j, k);
                            assert!((v - c.c3(j, i, k)).abs() < 1e-14);
                            assert!((v - c.c3(k, j, i)).abs() < 1e-14);
                            assert!((v - c.c3(i, k, j)).abs() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_route_agrees() {
        let s = random_state(5, 3, 99);
        let c = correlations(&s, 3).unwrap();
        let t = tensor_from_vector(&s);
        let l = 5;
        for i in 0..l {
            let mut c1 = 0.0;
            for j in 0..l {
                let mut c2 = 0.0;
                for k in 0..l {
                    let p = t.get(&[i, j, k]).norm_sqr();
                    c1 += p;
                    c2 += p;
                    assert!((c.c3(i, j, k) - 6.0 * p).abs() < 1e-12);
                }
                assert!((c.c2(i, j) - 6.0 * c2).abs() < 1e-12);
            }
            assert!((c.c1(i) - 3.0 * c1).abs() < 1e-12);
        }
    }

    #[test]
    fn ipr_examples() {
        let mut e = vec![Complex64::new(0.0, 0.0); 6];
        e[2] = Complex64::new(0.0, 2.0);
        assert_eq!(ipr_vector(&e).unwrap(), 1.0);
        let u = vec![Complex64::new(0.3, 0.0); 8];
        assert!((ipr_vector(&u).unwrap() - 1.0 / 8.0).abs() < 1e-15);
        assert!(ipr_vector(&[Complex64::new(0.0, 0.0); 3]).is_err());
        let chi = SymmetricTensor::from_values(2, 4, vec![Complex64::new(1.0, 0.0); 16]).unwrap();
        assert!((ipr_two_particle(&chi).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        let mut single = SymmetricTensor::zeros(2, 4);
        single.set(&[1, 1], Complex64::new(0.5, 0.0));
        assert_eq!(ipr_two_particle(&single).unwrap(), 1.0);
        assert!(ipr_two_particle(&SymmetricTensor::zeros(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn ipr_scale_invariant(
            v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
            re in 0.1f64..5.0, im in -5.0f64..5.0,
        ) {
            let v: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            prop_assume!(v.iter().any(|x| x.norm() > 1e-3));
            let c = Complex64::new(re, im);
            let w: Vec<_> = v.iter().map(|x| x * c).collect();
            let a = ipr_vector(&v).unwrap();
            prop_assert!((a - ipr_vector(&w).unwrap()).abs() < 1e-12);
            prop_assert!(a > 0.0 && a <= 1.0 + 1e-15);
        }
    }
}
