//! Python bindings. Parameter records cross the boundary as dicts with the
//! same keys as the TOML run configs.

use boseloc::bloch;
use boseloc::detector::{self, Detector, ScreeningThresholds};
use boseloc::dynamics::{self, ExtendedLattice, ProtocolKind, ProtocolSchedule};
use boseloc::model::{build_hamiltonian, Boundary, ModelParams as CoreParams};
use boseloc::spectstats;
use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: boseloc::Error) -> PyErr {
    match e {
        boseloc::Error::InvalidParameter(_) | boseloc::Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        boseloc::Error::Capacity { .. } => PyMemoryError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<Option<T>> {
    let Some(obj) = obj else { return Ok(None) };
    if obj.is_none() {
        return Ok(None);
    }
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map(Some).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn thresholds(py: Python<'_>, t: Option<&Bound<'_, PyAny>>) -> PyResult<ScreeningThresholds> {
    let t: ScreeningThresholds = from_py(py, t)?.unwrap_or_default();
    t.validate().map_err(err)?;
    Ok(t)
}

/// Bose-Hubbard chain in a `p/q` superlattice.
#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct ModelParams {
    inner: CoreParams,
}

#[pymethods]
impl ModelParams {
    #[new]
    #[pyo3(signature = (sites, particles, interaction, modulation, p=1, q=4, phase=-std::f64::consts::FRAC_PI_4, hopping=1.0, periodic=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        sites: usize,
        particles: usize,
        interaction: f64,
        modulation: f64,
        p: u32,
        q: u32,
        phase: f64,
        hopping: f64,
        periodic: bool,
    ) -> PyResult<Self> {
        let inner = CoreParams {
            hopping,
            interaction,
            modulation,
            p,
            q,
            phase,
            sites,
            particles,
            boundary: if periodic { Boundary::Periodic } else { Boundary::Open },
        };
        inner.validate().map_err(err)?;
        Ok(ModelParams { inner })
    }

    #[getter]
    fn sites(&self) -> usize {
        self.inner.sites
    }

    #[getter]
    fn particles(&self) -> usize {
        self.inner.particles
    }

    #[getter]
    fn interaction(&self) -> f64 {
        self.inner.interaction
    }

    #[getter]
    fn modulation(&self) -> f64 {
        self.inner.modulation
    }

    #[getter]
    fn phase(&self) -> f64 {
        self.inner.phase
    }

    /// On-site potentials `V_j`, site 1 first.
    fn potentials(&self) -> Vec<f64> {
        self.inner.potentials()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "ModelParams(sites={}, particles={}, interaction={}, modulation={}, p={}, q={}, phase={})",
            m.sites, m.particles, m.interaction, m.modulation, m.p, m.q, m.phase
        )
    }
}

/// Eigenvalues in ascending order.
#[pyfunction]
fn spectrum(params: &ModelParams) -> PyResult<Vec<f64>> {
    build_hamiltonian(&params.inner).and_then(|h| h.eigenvalues()).map_err(err)
}

/// One report dict per eigenstate, ascending in energy.
#[pyfunction]
#[pyo3(signature = (params, thresholds=None))]
fn classify_spectrum<'py>(
    py: Python<'py>,
    params: &ModelParams,
    thresholds: Option<&Bound<'py, PyAny>>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let t = self::thresholds(py, thresholds)?;
    let p = &params.inner;
    let reports = py
        .detach(|| -> boseloc::Result<_> {
            let h = build_hamiltonian(p)?;
            let eig = h.diagonalize()?;
            Detector::new(p, &t)?.classify_spectrum(&h, &eig)
        })
        .map_err(err)?;
    reports.iter().map(|r| to_py(py, &r.to_json())).collect()
}

/// Fraction rows over the `(U, V)` grid, row-major in `U`.
#[pyfunction]
#[pyo3(signature = (params, interactions, modulations, thresholds=None))]
fn fraction_scan<'py>(
    py: Python<'py>,
    params: &ModelParams,
    interactions: Vec<f64>,
    modulations: Vec<f64>,
    thresholds: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let t = self::thresholds(py, thresholds)?;
    let grid = detector::uv_grid(&params.inner, &interactions, &modulations);
    let rows = py.detach(|| detector::fraction_scan(&grid, &t)).map_err(err)?;
    to_py(py, &rows)
}

/// Gap ratios of a sorted level sequence.
#[pyfunction]
#[pyo3(signature = (levels, exclude_gap_edges=false, gap_count=2))]
fn r_ratios(levels: Vec<f64>, exclude_gap_edges: bool, gap_count: usize) -> PyResult<Vec<f64>> {
    spectstats::r_ratios(&levels, exclude_gap_edges, gap_count).map(|s| s.r_values).map_err(err)
}

#[pyfunction]
fn poisson_mean() -> f64 {
    spectstats::poisson_mean()
}

/// Summary of a two-boson ensemble. `config` follows the `[ensemble]` section
/// of a run config; `interaction` builds the default ensemble instead.
#[pyfunction]
#[pyo3(signature = (interaction=None, config=None))]
fn level_statistics<'py>(
    py: Python<'py>,
    interaction: Option<f64>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match (from_py::<spectstats::EnsembleConfig>(py, config)?, interaction) {
        (Some(c), _) => c,
        (None, Some(u)) => spectstats::EnsembleConfig::two_particle(u),
        (None, None) => return Err(PyValueError::new_err("give an interaction or a config")),
    };
    let st = py
        .detach(|| -> boseloc::Result<_> {
            let samples = spectstats::build_ensemble(&cfg)?;
            spectstats::aggregate(&samples, cfg.exclude_gap_edges, cfg.gap_count, cfg.bins)
        })
        .map_err(err)?;
    let out = to_py(py, &st.summary_json())?;
    out.cast::<PyDict>()?.set_item("histogram", to_py(py, &st.histogram)?)?;
    Ok(out)
}

/// Bands of the periodic single-particle superlattice.
#[pyfunction]
fn band_structure<'py>(py: Python<'py>, params: &ModelParams) -> PyResult<Bound<'py, PyDict>> {
    let b = bloch::band_structure(&params.inner.with_particles(1).with_boundary(Boundary::Periodic)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("momenta", b.momenta.clone())?;
    d.set_item("bands", b.bands.clone())?;
    d.set_item("middle_pair", b.middle_pair())?;
    Ok(d)
}

/// Standing-wave score of a real orbital on the bands of `params`.
#[pyfunction]
fn standing_wave_score(params: &ModelParams, phi: Vec<f64>) -> PyResult<f64> {
    let b = bloch::band_structure(&params.inner.with_particles(1).with_boundary(Boundary::Periodic)).map_err(err)?;
    let phi: Vec<_> = phi.into_iter().map(|x| num_complex::Complex64::new(x, 0.0)).collect();
    bloch::bloch_projection(&phi, &b).map(|w| bloch::standing_wave_score(&w)).map_err(err)
}

/// Runs the loading protocol. `kind` is "correlated" or "independent";
/// `schedule` overrides keys of that kind's default schedule.
#[pyfunction]
#[pyo3(signature = (params, kind="correlated", schedule=None, classify_above=1e-3))]
fn run_protocol<'py>(
    py: Python<'py>,
    params: &ModelParams,
    kind: &str,
    schedule: Option<&Bound<'py, PyAny>>,
    classify_above: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: ProtocolKind = serde_json::from_value(serde_json::Value::from(kind))
        .map_err(|_| PyValueError::new_err(format!("unknown protocol kind {kind:?}")))?;
    let mut s = serde_json::to_value(ProtocolSchedule::for_kind(kind)).expect("serializable");
    if let Some(serde_json::Value::Object(o)) = from_py::<serde_json::Value>(py, schedule)? {
        s.as_object_mut().expect("object").extend(o);
    }
    let s: ProtocolSchedule = serde_json::from_value(s).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let p = &params.inner;
    let (out, tab) = py
        .detach(|| -> boseloc::Result<_> {
            let lat = ExtendedLattice::for_kind(p, kind)?;
            let out = dynamics::run_protocol(&lat, &s)?;
            let t = ScreeningThresholds::default();
            let tab = dynamics::project_onto_initial_eigenstates(&out.state_t2, &lat, &s, &t, classify_above)?;
            Ok((out, tab))
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("transfer_efficiency", out.transfer_efficiency)?;
    d.set_item("retention", out.retention)?;
    d.set_item("norm_drift", out.norm_drift())?;
    d.set_item("energy_drift", out.energy_drift)?;
    d.set_item("self_localized_projection", tab.self_localized())?;
    d.set_item("times", out.record.times.clone())?;
    d.set_item("densities", out.record.densities.clone())?;
    d.set_item("projection", to_py(py, &tab.entries)?)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "boseloc")]
fn boseloc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelParams>()?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(classify_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(fraction_scan, m)?)?;
    m.add_function(wrap_pyfunction!(r_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_mean, m)?)?;
    m.add_function(wrap_pyfunction!(level_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(band_structure, m)?)?;
    m.add_function(wrap_pyfunction!(standing_wave_score, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    Ok(())
}
