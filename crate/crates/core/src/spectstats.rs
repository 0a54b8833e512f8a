//! Adjacent-gap ratio statistics of effective single-particle Hamiltonians.
//!
//! `r_m = min(d_m, d_{m+1}) / max(d_m, d_{m+1})` with `d_m = E_{m+1} - E_m`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{Detector, ScreeningThresholds, StateClass};
use crate::error::{Error, Result};
use crate::format::g12;
use crate::model::{build_effective_hamiltonian, build_hamiltonian, HamiltonianMatrix, ModelParams};

/// r-values of one spectrum and how many were dropped by gap exclusion.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioSet {
    pub r_values: Vec<f64>,
    pub excluded_count: usize,
}

/// Gap ratios of strictly increasing `levels`. With `exclude_gap_edges`, the
/// two ratios built on each of the `gap_count` largest spacings are dropped.
pub fn r_ratios(levels: &[f64], exclude_gap_edges: bool, gap_count: usize) -> Result<RatioSet> {
    if levels.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 levels, got {}", levels.len())));
    }
    if let Some(i) = levels.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("level {i} is not finite")));
    }
    if let Some(i) = levels.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedLevels { index: i + 1 });
    }
    let d: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let mut keep = vec![true; d.len() - 1];
    if exclude_gap_edges && gap_count > 0 {
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        for &m in order.iter().take(gap_count) {
            if m > 0 {
                keep[m - 1] = false;
            }
            if m < keep.len() {
                keep[m] = false;
            }
        }
    }
    let mut r_values = Vec::with_capacity(keep.len());
    for m in 0..keep.len() {
        if keep[m] {
            let (a, b) = (d[m], d[m + 1]);
            r_values.push(a.min(b) / a.max(b));
        }
    }
    Ok(RatioSet { excluded_count: keep.len() - r_values.len(), r_values })
}

/// Poisson density of the folded ratio, `2 / (1 + r)^2` on `[0, 1]`.
pub fn poisson_reference(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!("r = {r} outside [0, 1]")));
    }
    Ok(2.0 / (1.0 + r).powi(2))
}

/// `<r>` for Poisson levels, `2 ln 2 - 1`.
pub fn poisson_mean() -> f64 {
    2.0 * std::f64::consts::LN_2 - 1.0
}

/// Probability mass of the Poisson density on `[a, b]`.
pub fn poisson_mass(a: f64, b: f64) -> f64 {
    2.0 / (1.0 + a) - 2.0 / (1.0 + b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Uniform bins on `[0, 1]`; densities integrate to one.
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
        }
        if values.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let mut counts = vec![0usize; bins];
        for &r in values {
            let b = ((r * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let width = 1.0 / bins as f64;
        let n = values.len() as f64;
        Ok(Histogram {
            edges: (0..=bins).map(|b| b as f64 * width).collect(),
            densities: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
        })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.edges.windows(2).zip(&self.densities).map(|(w, d)| (w[1] - w[0]) * d).sum()
    }

    /// `sum_b |P_b - Poisson_b| width_b` against the bin-averaged Poisson density.
    pub fn l1_distance_to_poisson(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (d * (w[1] - w[0]) - poisson_mass(w[0], w[1])).abs())
            .sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpacingStatistics {
    pub r_values: Vec<f64>,
    pub histogram: Histogram,
    pub mean_r: f64,
    /// Standard error of `mean_r` treating r-values as independent.
    pub std_error: f64,
    pub excluded_count: usize,
    pub n_samples: usize,
}

impl SpacingStatistics {
    pub fn from_ratios(sets: &[RatioSet], bins: usize) -> Result<Self> {
        let r_values: Vec<f64> = sets.iter().flat_map(|s| s.r_values.iter().copied()).collect();
        if r_values.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let n = r_values.len() as f64;
        let mean_r = r_values.iter().sum::<f64>() / n;
        let var = r_values.iter().map(|r| (r - mean_r).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok(SpacingStatistics {
            histogram: Histogram::new(&r_values, bins)?,
            mean_r,
            std_error: (var / n).sqrt(),
            excluded_count: sets.iter().map(|s| s.excluded_count).sum(),
            n_samples: sets.len(),
            r_values,
        })
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mean_r": self.mean_r,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "n_ratios": self.r_values.len(),
            "excluded_count": self.excluded_count,
            "l1_distance_to_poisson": self.histogram.l1_distance_to_poisson(),
        })
    }

    pub fn write_r_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "r")?;
        for r in &self.r_values {
            writeln!(w, "{}", g12(*r))?;
        }
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "bin_center,density,poisson_density")?;
        let h = &self.histogram;
        for ((c, d), e) in h.centers().iter().zip(&h.densities).zip(h.edges.windows(2)) {
            let p = poisson_mass(e[0], e[1]) / (e[1] - e[0]);
            writeln!(w, "{},{},{}", g12(*c), g12(*d), g12(p))?;
        }
        Ok(())
    }
}

/// How the window half-width is read: as a phase interval in `xi`, or in
/// `xi / 2pi` (the window then spans `2pi` times as much phase).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum XiWindow {
    #[default]
    Phase,
    ReducedPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub params: ModelParams,
    /// Window centres in radians.
    pub xi_centers: Vec<f64>,
    pub window_halfwidth: f64,
    /// Sample step in units of `xi / 2pi`.
    pub sample_step: f64,
    #[serde(default)]
    pub window_units: XiWindow,
    #[serde(default = "ScreeningThresholds::statistics")]
    pub thresholds: ScreeningThresholds,
    #[serde(default = "yes")]
    pub exclude_gap_edges: bool,
    #[serde(default = "two")]
    pub gap_count: usize,
    #[serde(default = "twenty")]
    pub bins: usize,
}

fn yes() -> bool {
    true
}

fn two() -> usize {
    2
}

fn twenty() -> usize {
    20
}

/// `xi_n = pi/4 + n pi/2`, `n = 0..3`.
pub fn phase_peaks() -> Vec<f64> {
    (0..4).map(|n| PI / 4.0 + n as f64 * PI / 2.0).collect()
}

impl EnsembleConfig {
    /// Two bosons on 64 sites, `beta = 1/4`, `V = 10`.
    pub fn two_particle(interaction: f64) -> Self {
        EnsembleConfig {
            params: ModelParams::quarter_superlattice(64, 2, interaction, 10.0),
            xi_centers: phase_peaks(),
            window_halfwidth: 0.002 * PI,
            sample_step: 5e-5,
            window_units: XiWindow::Phase,
            thresholds: ScreeningThresholds::statistics(),
            exclude_gap_edges: true,
            gap_count: 2,
            bins: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.thresholds.validate()?;
        if !(self.window_halfwidth > 0.0 && self.window_halfwidth.is_finite()) {
            return Err(Error::InvalidParameter("window half-width must be positive".into()));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(Error::InvalidParameter("sample step must be positive".into()));
        }
        if self.params.particles != 2 {
            return Err(Error::InvalidParameter("ensembles are built from two-particle spectra".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidParameter("bins must be positive".into()));
        }
        Ok(())
    }

    /// Phases sampled in every window, in increasing order per window.
    pub fn xi_samples(&self) -> Vec<f64> {
        let half = match self.window_units {
            XiWindow::Phase => self.window_halfwidth,
            XiWindow::ReducedPhase => 2.0 * PI * self.window_halfwidth,
        };
        let step = 2.0 * PI * self.sample_step;
        let n = (half / step + 1e-9).floor() as i64;
        self.xi_centers
            .iter()
            .flat_map(|&c| (-n..=n).map(move |k| c + k as f64 * step))
            .collect()
    }
}

/// One effective Hamiltonian built from the extended state of an accepted
/// two-particle eigenstate.
#[derive(Clone, Debug)]
pub struct EnsembleSample {
    pub xi: f64,
    pub energy: f64,
    pub ipr_phi: f64,
    pub hamiltonian: HamiltonianMatrix,
}

/// Screens every eigenstate at each sampled phase and builds
/// `H_eff(phi)` for each accepted one. May be empty.
pub fn build_ensemble(config: &EnsembleConfig) -> Result<Vec<EnsembleSample>> {
    config.validate()?;
    let per_xi: Vec<Vec<EnsembleSample>> =
        config.xi_samples().par_iter().map(|&xi| samples_at(config, xi)).collect::<Result<_>>()?;
    Ok(per_xi.into_iter().flatten().collect())
}

fn samples_at(config: &EnsembleConfig, xi: f64) -> Result<Vec<EnsembleSample>> {
    let params = ModelParams { phase: xi, ..config.params.clone() };
    let h = build_hamiltonian(&params)?;
    let eig = h.diagonalize()?;
    let det = Detector::new(&params, &config.thresholds)?;
    let reports = det.classify_spectrum(&h, &eig)?;
    let single = params.with_particles(1);
    reports
        .into_iter()
        .filter(|r| r.class == StateClass::TwoParticleALL)
        .map(|r| {
            let phi = r.phi.expect("accepted report carries phi");
            Ok(EnsembleSample {
                xi,
                energy: r.energy.unwrap_or(f64::NAN),
                ipr_phi: r.ipr_phi.unwrap_or(f64::NAN),
                hamiltonian: build_effective_hamiltonian(&single, &phi, config.thresholds.include_pair_breaking)?,
            })
        })
        .collect()
}

/// Pools the gap ratios of every sample.
pub fn aggregate(samples: &[EnsembleSample], exclude_gap_edges: bool, gap_count: usize, bins: usize) -> Result<SpacingStatistics> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let sets: Vec<RatioSet> = samples
        .par_iter()
        .map(|s| r_ratios(&s.hamiltonian.eigenvalues()?, exclude_gap_edges, gap_count))
        .collect::<Result<_>>()?;
    SpacingStatistics::from_ratios(&sets, bins)
}

/// Pools gap ratios of raw level sequences.
pub fn aggregate_levels(levels: &[Vec<f64>], exclude_gap_edges: bool, gap_count: usize, bins: usize) -> Result<SpacingStatistics> {
    if levels.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let sets: Vec<RatioSet> =
        levels.iter().map(|l| r_ratios(l, exclude_gap_edges, gap_count)).collect::<Result<_>>()?;
    SpacingStatistics::from_ratios(&sets, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn examples() {
        assert_eq!(r_ratios(&[0.0, 1.0, 2.0, 3.0], false, 0).unwrap().r_values, vec![1.0, 1.0]);
        assert_eq!(r_ratios(&[0.0, 1.0, 3.0], false, 0).unwrap().r_values, vec![0.5]);
        assert!(matches!(r_ratios(&[0.0, 2.0, 1.0], false, 0), Err(Error::UnsortedLevels { index: 2 })));
        assert!(matches!(r_ratios(&[0.0, 1.0, 1.0, 2.0], false, 0), Err(Error::UnsortedLevels { index: 2 })));
        assert!(r_ratios(&[0.0, 1.0], false, 0).is_err());
    }

    #[test]
    fn banded_spectrum_loses_four_ratios() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut levels = Vec::new();
        for band in 0..3 {
            for k in 0..20 {
                levels.push(100.0 * band as f64 + k as f64 + rng.random_range(0.0..0.5));
            }
        }
        let all = r_ratios(&levels, false, 2).unwrap();
        let cut = r_ratios(&levels, true, 2).unwrap();
        assert_eq!(all.r_values.len() - cut.r_values.len(), 4);
        assert_eq!(cut.excluded_count, 4);
        assert_eq!(all.r_values.iter().filter(|&&r| r < 0.02).count(), 4);
        assert!(cut.r_values.iter().all(|&r| r > 0.02));
    }

    #[test]
    fn poisson_density() {
        assert_eq!(poisson_reference(0.0).unwrap(), 2.0);
        assert_eq!(poisson_reference(1.0).unwrap(), 0.5);
        assert!(poisson_reference(1.5).is_err());
        // Simpson quadrature of r P(r) and P(r).
        let n = 2000;
        let h = 1.0 / n as f64;
        let (mut mean, mut mass) = (0.0, 0.0);
        for i in 0..=n {
            let r = i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let p = poisson_reference(r).unwrap();
            mean += w * r * p;
            mass += w * p;
        }
        assert!((mean * h / 3.0 - poisson_mean()).abs() < 1e-8);
        assert!((mass * h / 3.0 - 1.0).abs() < 1e-10);
        assert!((poisson_mean() - 0.3863).abs() < 1e-4);
    }

    #[test]
    fn histogram_normalized() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let h = Histogram::new(&v, 20).unwrap();
        assert!((h.integral() - 1.0).abs() < 1e-12);
        assert!(h.densities.iter().all(|&d| (d - 1.0).abs() < 1e-12));
        let one = Histogram::new(&[1.0], 4).unwrap();
        assert_eq!(one.densities[3], 4.0);
    }

    #[test]
    fn window_readings() {
        let mut c = EnsembleConfig::two_particle(50.0);
        let xs = c.xi_samples();
        assert_eq!(xs.len(), 4 * 41);
        assert!(xs.iter().all(|x| phase_peaks().iter().any(|c| (x - c).abs() <= 0.002 * PI + 1e-12)));
        c.window_units = XiWindow::ReducedPhase;
        assert_eq!(c.xi_samples().len(), 4 * (2 * 125 + 1));
        c.sample_step = 0.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            gaps in prop::collection::vec(0.01f64..3.0, 3..40),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let mut levels = vec![0.0];
            for g in &gaps {
                levels.push(levels.last().unwrap() + g);
            }
            let r1 = r_ratios(&levels, true, 1).unwrap();
            let scaled: Vec<f64> = levels.iter().map(|e| a * e + b).collect();
            let r2 = r_ratios(&scaled, true, 1).unwrap();
            prop_assert_eq!(r1.r_values.len(), r2.r_values.len());
            for (x, y) in r1.r_values.iter().zip(&r2.r_values) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!(*x > 0.0 && *x <= 1.0);
            }
        }
    }
}
