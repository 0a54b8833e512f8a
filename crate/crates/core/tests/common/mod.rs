//! Independent first-quantized constructions used as oracles.
#![allow(dead_code)]

use boseloc::fockspace::{FockBasis, ManyBodyState};
use boseloc::model::ModelParams;
use boseloc::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All ordered position tuples `(x_1, ..., x_N)`, `x_1` slowest.
pub fn configurations(sites: usize, particles: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..particles {
        out = out
            .into_iter()
            .flat_map(|c| (0..sites).map(move |x| [c.clone(), vec![x]].concat()))
            .collect();
    }
    out
}

fn tuple_index(x: &[usize], sites: usize) -> usize {
    x.iter().fold(0, |acc, &xi| acc * sites + xi)
}

/// `H = sum_a h1(x_a) + U sum_{a<b} delta(x_a, x_b)` on `L^N` distinguishable
/// configurations, with `h1` the single-particle hopping plus potential.
pub fn first_quantized_hamiltonian(p: &ModelParams) -> Vec<Vec<f64>> {
    let l = p.sites;
    let n = p.particles;
    let confs = configurations(l, n);
    let v = p.potentials();
    let mut h1 = vec![vec![0.0; l]; l];
    for j in 0..l {
        h1[j][j] = v[j];
    }
    for (a, b) in p.bonds() {
        h1[a][b] -= p.hopping;
        h1[b][a] -= p.hopping;
    }
    let dim = confs.len();
    let mut h = vec![vec![0.0; dim]; dim];
    for (r, x) in confs.iter().enumerate() {
        for a in 0..n {
            for y in 0..l {
                let mut xp = x.clone();
                xp[a] = y;
                h[tuple_index(&xp, l)][r] += h1[y][x[a]];
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                if x[a] == x[b] {
                    h[r][r] += p.interaction;
                }
            }
        }
    }
    h
}

/// Columns: the symmetric first-quantized image of each Fock state.
pub fn symmetric_embedding(basis: &FockBasis) -> Vec<Vec<f64>> {
    let l = basis.sites();
    let n = basis.particles();
    let confs = configurations(l, n);
    let nfact: f64 = (1..=n).map(|k| k as f64).product();
    basis
        .states()
        .iter()
        .map(|s| {
            let occ = s.occupations();
            let prod: f64 = occ.iter().map(|&k| (1..=k as usize).map(|m| m as f64).product::<f64>()).product();
            let amp = (prod / nfact).sqrt();
            confs
                .iter()
                .map(|x| {
                    let mut count = vec![0u8; l];
                    for &xi in x {
                        count[xi] += 1;
                    }
                    if count == occ { amp } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// `E^T H E` in the Fock basis.
pub fn projected_hamiltonian(p: &ModelParams, basis: &FockBasis) -> Vec<Vec<f64>> {
    let h = first_quantized_hamiltonian(p);
    let e = symmetric_embedding(basis);
    let dim = h.len();
    let he: Vec<Vec<f64>> = e
        .iter()
        .map(|col| (0..dim).map(|r| (0..dim).map(|c| h[r][c] * col[c]).sum()).collect())
        .collect();
    e.iter()
        .map(|a| he.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

/// Symmetric amplitudes `Psi(x_1, ..., x_N)` of a Fock-basis state.
pub fn first_quantized(psi: &ManyBodyState) -> Vec<Complex64> {
    let e = symmetric_embedding(psi.basis());
    let dim = e[0].len();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (col, c) in e.iter().zip(psi.coefficients()) {
        for (o, x) in out.iter_mut().zip(col) {
            *o += c * x;
        }
    }
    out
}

/// `<b†_i b_i>`, `<b†_i b†_j b_j b_i>` and the third-order analogue from
/// marginals of `|Psi|^2`.
pub fn marginal_correlations(psi: &ManyBodyState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let l = psi.basis().sites();
    let n = psi.basis().particles();
    let amp = first_quantized(psi);
    let confs = configurations(l, n);
    let mut c1 = vec![0.0; l];
    let mut c2 = vec![0.0; l * l];
    let mut c3 = vec![0.0; l * l * l];
    for (x, a) in confs.iter().zip(&amp) {
        let w = a.norm_sqr();
        c1[x[0]] += w * n as f64;
        if n >= 2 {
            c2[x[0] * l + x[1]] += w * (n * (n - 1)) as f64;
        }
        if n >= 3 {
            c3[(x[0] * l + x[1]) * l + x[2]] += w * (n * (n - 1) * (n - 2)) as f64;
        }
    }
    (c1, c2, c3)
}

pub fn random_state(basis: &std::sync::Arc<FockBasis>, rng: &mut ChaCha8Rng) -> ManyBodyState {
    let c: Vec<Complex64> = (0..basis.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut s = ManyBodyState::new(basis.clone(), c).unwrap();
    s.normalize().unwrap();
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Levels with independent unit-mean exponential spacings.
pub fn poisson_levels(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut e = 0.0;
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            e += -u.ln();
            e
        })
        .collect()
}

/// Normalized `sym(a ⊗ b ⊗ c)`.
pub fn sym3(a: &[Complex64], b: &[Complex64], c: &[Complex64]) -> boseloc::fockspace::SymmetricTensor {
    let l = a.len();
    let mut t = boseloc::fockspace::SymmetricTensor::zeros(3, l);
    for i in 0..l {
        for j in 0..l {
            for k in 0..l {
                let v = a[i] * (b[j] * c[k] + b[k] * c[j]) + a[j] * (b[i] * c[k] + b[k] * c[i]) + a[k] * (b[i] * c[j] + b[j] * c[i]);
                t.set(&[i, j, k], v);
            }
        }
    }
    t.normalize().unwrap();
    t
}

pub fn unit(l: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); l];
    v[i] = Complex64::new(1.0, 0.0);
    v
}

/// Extended real profile vanishing on `holes`.
pub fn standing_wave(l: usize, holes: &[usize]) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..l)
        .map(|j| {
            if holes.contains(&j) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((std::f64::consts::PI * (j as f64 + 1.0) * 3.0 / (l as f64 + 1.0)).sin() + 0.3, 0.0)
            }
        })
        .collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn state_of(t: &boseloc::fockspace::SymmetricTensor) -> ManyBodyState {
    let basis = std::sync::Arc::new(FockBasis::new(t.extent(), t.order()).unwrap());
    boseloc::fockspace::vector_from_tensor(t, &basis, true).unwrap()
}
