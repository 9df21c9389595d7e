//! Experiment files: TOML with `[process]`, `[domain]`, `[grid]`, `[run]`, `[scheme]`,
//! `[tolerances]` and `[check]` sections.

use std::path::Path;

use greenlab::geometry::Domain;
use greenlab::levy_model::{ProcessSpec, Variant};
use greenlab::mc_engine::SimScheme;
use greenlab::verify_harness::{ExperimentConfig, Grid, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub d: usize,
    pub alpha: f64,
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub xs: Vec<Vec<f64>>,
    #[serde(default)]
    pub ys: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_paths")]
    pub n_paths: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_paths() -> u64 {
    100_000
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_paths: default_paths(),
            seed: 0,
        }
    }
}

/// Per-check parameters; each check reads the keys it needs and falls back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadruples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub process: ProcessSection,
    pub domain: Domain,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub scheme: SimScheme,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub check: CheckSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn with_overrides(mut self, seed: Option<u64>, paths: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.run.seed = s;
        }
        if let Some(n) = paths {
            self.run.n_paths = n;
        }
        self
    }

    /// Sorted keys, every default spelled out, floats in shortest round-trip form.
    pub fn canonical(&self) -> Result<String, CliError> {
        let value = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        toml::to_string(&value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn hash(&self) -> Result<String, CliError> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn spec(&self) -> Result<ProcessSpec, CliError> {
        let p = &self.process;
        let variant = p.variant.unwrap_or(Variant::Plain);
        let m_cap = p.m_cap.unwrap_or(p.a.max(1.0));
        Ok(ProcessSpec::new(p.d, p.alpha, p.a, variant, m_cap)?)
    }

    pub fn experiment(&self, workers: usize) -> Result<ExperimentConfig, CliError> {
        let cfg = ExperimentConfig {
            spec: self.spec()?,
            domain: self.domain.clone(),
            grid: Grid {
                xs: self.grid.xs.clone(),
                ys: self.grid.ys.clone(),
            },
            n_paths: self.run.n_paths,
            seed: self.run.seed,
            scheme: self.scheme,
            tolerances: self.tolerances.clone(),
            workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
