//! Command implementations behind the `greenlab` binary.

pub mod commands;
pub mod config;
pub mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] greenlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use greenlab::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) | CliError::Csv(_) => EXIT_FAIL,
            CliError::Core(e) => match e {
                E::Domain(_)
                | E::Config(_)
                | E::Shape { .. }
                | E::UnsupportedVariant(_)
                | E::UnsupportedDomain(_)
                | E::Recurrent(_)
                | E::Singularity
                | E::Bias(_) => EXIT_CONFIG,
                E::InsufficientData(_) | E::Statistics(_) => EXIT_INCONCLUSIVE,
                _ => EXIT_FAIL,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub artifact_version: String,
    pub outputs: Vec<String>,
    /// Grid pairs dropped because the points coincide or sit too close for the estimator.
    #[serde(default)]
    pub skipped_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRecord {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub theorem: String,
    pub pass: bool,
    pub band: BandRecord,
    pub details_path: String,
    pub manifest: RunManifest,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 2.5e17, -0.0, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Core(greenlab::Error::Singularity).exit_code(), EXIT_CONFIG);
        assert_eq!(
            CliError::Core(greenlab::Error::InsufficientData("x".into())).exit_code(),
            EXIT_INCONCLUSIVE
        );
        assert_eq!(CliError::Core(greenlab::Error::Inversion("x".into())).exit_code(), EXIT_FAIL);
    }
}
