//! Single-particle bands of the periodic superlattice and projections of
//! one-body orbitals onto Bloch states.
//!
//! A Bloch state with crystal momentum `k` has amplitudes
//! `psi(j) = e^{i k j} u(j mod q) / sqrt(M)` on sites `j = 0..L`, where `M = L/q`
//! is the number of unit cells and `u` is an eigenvector of the `q x q` Bloch
//! Hamiltonian `H(k)`. Momenta run over `k_n = 2 pi n / L`, `n` in `(-M/2, M/2]`.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::g12;
use crate::model::{Boundary, ModelParams};
use crate::spectral::{self, HermitianMatrix};

type C = Complex64;

#[derive(Debug, Clone)]
pub struct BandStructure {
    /// Ascending momenta in `(-pi/q, pi/q]`.
    pub momenta: Vec<f64>,
    /// Integer labels `n` of the momenta, `k = 2 pi n / L`.
    pub labels: Vec<i64>,
    /// `bands[b][i]` is the energy of band `b` (ascending) at `momenta[i]`.
    pub bands: Vec<Vec<f64>>,
    states: Vec<Vec<C>>,
    sites: usize,
    cell: usize,
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn cell_size(&self) -> usize {
        self.cell
    }

    /// Bloch state of band `b` at momentum index `i`, unit norm on the full chain.
    pub fn state(&self, band: usize, k: usize) -> &[C] {
        &self.states[band * self.momenta.len() + k]
    }

    /// Index of `-k` for momentum index `i`.
    pub fn partner(&self, i: usize) -> usize {
        let m = self.momenta.len() as i64;
        let mut n = -self.labels[i];
        // -M/2 is the same point as M/2
        if 2 * n <= -m {
            n += m;
        }
        self.labels.iter().position(|&x| x == n).expect("grid is reflection symmetric")
    }

    /// Largest `|E_b(k) - E_b(-k)|`.
    pub fn time_reversal_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for band in &self.bands {
            for i in 0..self.momenta.len() {
                worst = worst.max((band[i] - band[self.partner(i)]).abs());
            }
        }
        worst
    }

    pub fn bandwidth(&self, band: usize) -> f64 {
        let e = &self.bands[band];
        e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// The two bands around the centre of the spectrum, for an even band count.
    pub fn middle_pair(&self) -> Option<(usize, usize)> {
        let q = self.band_count();
        (q >= 2 && q % 2 == 0).then(|| (q / 2 - 1, q / 2))
    }

    /// `(band, k, energy)` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "band,k,energy")?;
        for (b, band) in self.bands.iter().enumerate() {
            for (k, e) in self.momenta.iter().zip(band) {
                writeln!(w, "{b},{},{}", g12(*k), g12(*e))?;
            }
        }
        Ok(())
    }
}

/// `q x q` Bloch Hamiltonian for cell potentials `v` at momentum `k`.
pub fn bloch_hamiltonian(v: &[f64], hopping: f64, k: f64) -> Mat<C> {
    let q = v.len();
    let mut h = Mat::<C>::zeros(q, q);
    for m in 0..q {
        h[(m, m)] += C::new(v[m], 0.0);
        let next = (m + 1) % q;
        let t = C::from_polar(hopping, k);
        h[(m, next)] -= t;
        h[(next, m)] -= t.conj();
    }
    h
}

pub fn band_structure(params: &ModelParams) -> Result<BandStructure> {
    params.validate()?;
    if params.boundary != Boundary::Periodic {
        return Err(Error::InvalidParameter("band structure needs periodic boundaries".into()));
    }
    let l = params.sites;
    let q = params.q as usize;
    if l % q != 0 {
        return Err(Error::InvalidParameter(format!("{l} sites hold no whole number of {q}-site cells")));
    }
    let cells = l / q;
    let v: Vec<f64> = params.potentials()[..q].to_vec();
    let half = cells as i64 / 2;
    let labels: Vec<i64> = (-((cells as i64 - 1) / 2)..=half).collect();
    debug_assert_eq!(labels.len(), cells);
    let momenta: Vec<f64> = labels.iter().map(|&n| 2.0 * PI * n as f64 / l as f64).collect();

    let mut bands = vec![vec![0.0; cells]; q];
    let mut cell_vectors: Vec<Vec<Vec<C>>> = vec![vec![Vec::new(); cells]; q];
    for (i, &n) in labels.iter().enumerate() {
        // fill -k from k by conjugation so that the pair is exactly time-reversed
        if n < 0 && labels.contains(&-n) {
            continue;
        }
        let eig = spectral::eigh(&HermitianMatrix::Complex(bloch_hamiltonian(&v, params.hopping, momenta[i])))?;
        for b in 0..q {
            let mut u = eig.vector(b);
            spectral::fix_phase(&mut u);
            bands[b][i] = eig.eigenvalues[b];
            cell_vectors[b][i] = u;
        }
        if n > 0 {
            if let Some(j) = labels.iter().position(|&x| x == -n) {
                for b in 0..q {
                    bands[b][j] = bands[b][i];
                    cell_vectors[b][j] = cell_vectors[b][i].iter().map(|z| z.conj()).collect();
                }
            }
        }
    }

    let norm = 1.0 / (cells as f64).sqrt();
    let mut states = Vec::with_capacity(q * cells);
    for b in 0..q {
        for (i, &k) in momenta.iter().enumerate() {
            let u = &cell_vectors[b][i];
            states.push((0..l).map(|j| C::from_polar(norm, k * j as f64) * u[j % q]).collect());
        }
    }
    Ok(BandStructure { momenta, labels, bands, states, sites: l, cell: q })
}

/// `|<psi(b, k)|phi>|^2` over the band structure.
#[derive(Debug, Clone)]
pub struct BlochWeights {
    pub momenta: Vec<f64>,
    pub partners: Vec<usize>,
    /// `weights[b][i]`.
    pub weights: Vec<Vec<f64>>,
}

impl BlochWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    pub fn band_weight(&self, band: usize) -> f64 {
        self.weights[band].iter().sum()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "band,k,weight")?;
        for (b, row) in self.weights.iter().enumerate() {
            for (k, x) in self.momenta.iter().zip(row) {
                writeln!(w, "{b},{},{}", g12(*k), g12(*x))?;
            }
        }
        Ok(())
    }
}

pub fn bloch_projection(phi: &[C], bands: &BandStructure) -> Result<BlochWeights> {
    if phi.len() != bands.sites {
        return Err(Error::DimensionMismatch { expected: bands.sites, found: phi.len() });
    }
    let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("orbital has norm^2 {norm}, expected 1")));
    }
    let nk = bands.momenta.len();
    let weights = (0..bands.band_count())
        .map(|b| {
            (0..nk)
                .map(|i| bands.state(b, i).iter().zip(phi).map(|(a, x)| a.conj() * x).sum::<C>().norm_sqr())
                .collect()
        })
        .collect();
    Ok(BlochWeights {
        momenta: bands.momenta.clone(),
        partners: (0..nk).map(|i| bands.partner(i)).collect(),
        weights,
    })
}

/// `1 - sum |w(k) - w(-k)| / sum (w(k) + w(-k))`; 1 for a standing wave, 0 for a
/// single running wave.
pub fn standing_wave_score(w: &BlochWeights) -> f64 {
    let mut diff = 0.0;
    let mut total = 0.0;
    for row in &w.weights {
        for (i, &x) in row.iter().enumerate() {
            let y = row[w.partners[i]];
            diff += (x - y).abs();
            total += x + y;
        }
    }
    if total == 0.0 {
        return 1.0;
    }
    1.0 - diff / total
}
