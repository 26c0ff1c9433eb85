//! `manifest.toml`: the resolved config, its hash and the scalar results of
//! one command. Passing a manifest back as `--config` repeats the run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub workers: usize,
    pub config: RunConfig,
    pub report: Report,
}

/// Scalar outputs. Everything except `wall_time_s` is deterministic for a
/// fixed config and worker count.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Report {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_est: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

impl Report {
    pub fn set(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value);
    }
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, workers: usize, report: Report) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            workers,
            config: config.clone(),
            report,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("manifest: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join("manifest.toml"), self.to_toml())?;
        Ok(())
    }

    /// True when the stored hash matches the stored config.
    pub fn hash_matches(&self) -> bool {
        self.config.hash() == self.config_hash
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_non_finite_values() {
        let mut report = Report {
            status: "ok".into(),
            outcome: Some("CompletedHorizon".into()),
            t_est: Some(f64::INFINITY),
            ..Report::default()
        };
        report.set("xnorm", 1.25);
        let m = Manifest::new("run", &RunConfig::default(), 1, report);
        let back = Manifest::parse(&m.to_toml()).unwrap();
        assert_eq!(m, back);
        assert!(back.hash_matches());
        assert_eq!(RunConfig::parse(&m.to_toml()).unwrap(), RunConfig::default());
    }
}
