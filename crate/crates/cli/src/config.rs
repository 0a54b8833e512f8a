use std::path::{Path, PathBuf};

use boseloc::detector::ScreeningThresholds;
use boseloc::dynamics::{ProtocolKind, ProtocolSchedule};
use boseloc::model::ModelParams;
use boseloc::spectstats::EnsembleConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One run, read from a TOML file. Each command reads the sections it needs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub thresholds: ScreeningThresholds,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub classify: ClassifyOptions,
    /// One or more `[[scan]]` grids, emitted in order.
    #[serde(default)]
    pub scan: Vec<ScanGrid>,
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub rstats: RstatsOptions,
    #[serde(default)]
    pub bloch: BlochOptions,
    #[serde(default)]
    pub protocol: ProtocolOptions,
    /// Keys override the default schedule of each protocol kind.
    pub schedule: Option<toml::Table>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumOptions {
    /// Indices (ascending energy, 0-based) of eigenvectors to dump.
    pub eigenvectors: Vec<usize>,
    /// Also dump the eigenvector nearest to each of these energies.
    pub energies: Vec<f64>,
    /// Write the correlation functions of every dumped eigenvector.
    pub correlations: bool,
    pub dump_matrix: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    /// Correlation functions of the first this-many accepted states of each
    /// class, of their effective-model reconstruction, and the density of
    /// their localized part.
    pub correlations: usize,
    /// Classifies once per value, one subdirectory each; empty uses
    /// `model.interaction`.
    pub interactions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    /// Tag written in the `grid` column.
    #[serde(default)]
    pub label: String,
    /// Overrides `model.sites`.
    pub sites: Option<usize>,
    pub interactions: Vec<f64>,
    pub modulations: Vec<f64>,
    /// Empty keeps the phase of `[model]`.
    #[serde(default)]
    pub phases: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RstatsOptions {
    /// Runs the ensemble once per value; empty uses `ensemble.params.interaction`.
    pub interactions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochOptions {
    /// Also classify the open-chain spectrum and project every accepted
    /// two-particle orbital onto the bands.
    pub project: bool,
}

impl Default for BlochOptions {
    fn default() -> Self {
        BlochOptions { project: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolOptions {
    /// Several kinds write into one subdirectory each.
    pub kinds: Vec<ProtocolKind>,
    /// Eigenstates of the initial Hamiltonian above this probability are
    /// classified.
    pub classify_above: f64,
    /// Second run at this interaction for the retention comparison.
    pub reference_interaction: Option<f64>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions { kinds: vec![ProtocolKind::Correlated], classify_above: 1e-3, reference_interaction: None }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<&ModelParams, CliError> {
        let m = self.model.as_ref().ok_or_else(|| CliError::Config("missing [model] section".into()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn schedule(&self, kind: ProtocolKind) -> Result<ProtocolSchedule, CliError> {
        let defaults = ProtocolSchedule::for_kind(kind);
        let Some(overrides) = &self.schedule else {
            return Ok(defaults);
        };
        let mut table = toml::Table::try_from(&defaults).map_err(|e| CliError::Config(e.to_string()))?;
        table.extend(overrides.clone());
        let s: ProtocolSchedule = table.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("[schedule]: {e}")))?;
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_overrides_the_kind_defaults() {
        let cfg = RunConfig::parse("[schedule]\nt3 = 300\n").unwrap();
        let s = cfg.schedule(ProtocolKind::Independent).unwrap();
        assert_eq!(s.t3, 300.0);
        assert_eq!(s.j_prime, ProtocolSchedule::independent().j_prime);
        let bad = RunConfig::parse("[schedule]\nt3 = 50\n").unwrap();
        assert!(matches!(bad.schedule(ProtocolKind::Correlated), Err(CliError::Core(boseloc::Error::InvalidParameter(_)))));
        let unknown = RunConfig::parse("[schedule]\nramp = 1\n").unwrap();
        assert!(matches!(unknown.schedule(ProtocolKind::Correlated), Err(CliError::Config(_))));
    }
}
