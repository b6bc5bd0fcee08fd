//! Experiment files for `fdrstep simulate`.
//!
//! ```toml
//! n = 100
//! n0 = 30
//! delta = 0.5
//! rho = 0.0
//! seed = 1              # optional here; --seed on the command line wins
//!
//! # optional, with defaults
//! alpha = 0.05
//! beta = 0.05
//! tau_quantile = 0.5
//! iterations = 5000
//! procedures = ["bonferroni-fdr", "mod-bonferroni-fdr", "sidak-fdr", "mod-sidak-fdr"]
//! metrics = ["FDR", "FNR", "POWER"]
//!
//! [reference]           # calibration of FNR procedures; default f0
//! kind = "f1"
//! delta = 0.5
//! ```

use std::path::Path;

use fdrstep_core::simulation::{DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_ITERATIONS, DEFAULT_TAU_QUANTILE};
use fdrstep_core::{ExperimentConfig, Metric, ProcedureKind, ProcedureSpec, ReferenceCdf};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub n: usize,
    pub n0: usize,
    pub delta: f64,
    pub rho: f64,
    pub seed: Option<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_tau_quantile")]
    pub tau_quantile: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_procedures")]
    pub procedures: Vec<String>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub reference: ReferenceSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default)]
    pub kind: ReferenceKind,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    #[default]
    F0,
    F1,
}

impl ReferenceKind {
    /// Resolves to a reference CDF; `F1` needs a shift.
    pub fn resolve(self, delta: Option<f64>) -> Result<ReferenceCdf, String> {
        match (self, delta) {
            (Self::F0, _) => Ok(ReferenceCdf::F0),
            (Self::F1, Some(delta)) => Ok(ReferenceCdf::F1 { delta }),
            (Self::F1, None) => Err("reference.delta: required when the reference is f1".into()),
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_tau_quantile() -> f64 {
    DEFAULT_TAU_QUANTILE
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_procedures() -> Vec<String> {
    ProcedureKind::FDR.iter().map(|k| k.name().to_string()).collect()
}
fn default_metrics() -> Vec<String> {
    [Metric::Fdr, Metric::Fnr, Metric::Power]
        .iter()
        .map(|m| m.name().to_string())
        .collect()
}

/// Problems with the file's content; reported as usage errors.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_experiment(text: &str) -> Result<ExperimentFile, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim().replace('\n', " ")))
}

pub fn load_experiment(path: &Path) -> Result<ExperimentFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_experiment(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl ExperimentFile {
    /// Builds and validates the core experiment; `seed` is the resolved seed.
    pub fn to_experiment(&self, seed: u64) -> Result<(ExperimentConfig, Vec<Metric>), ConfigError> {
        let reference = self.reference.kind.resolve(self.reference.delta).map_err(ConfigError)?;
        let mut cfg = ExperimentConfig {
            n: self.n,
            n0: self.n0,
            delta: self.delta,
            rho: self.rho,
            alpha: self.alpha,
            beta: self.beta,
            tau_quantile: self.tau_quantile,
            iterations: self.iterations,
            master_seed: seed,
            procedures: Vec::new(),
        };
        // Range checks first so the offending key is reported before any
        // procedure is compiled.
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        let kinds = self
            .procedures
            .iter()
            .map(|p| {
                p.parse::<ProcedureKind>()
                    .map_err(|e| ConfigError(format!("procedures: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if kinds.is_empty() {
            return Err(ConfigError("procedures: must list at least one procedure".into()));
        }
        cfg.procedures = kinds
            .into_iter()
            .map(|kind| {
                let level = match kind.side() {
                    fdrstep_core::ErrorSide::Fdr => cfg.alpha,
                    fdrstep_core::ErrorSide::Fnr => cfg.beta,
                };
                ProcedureSpec::new(kind, level, cfg.n, cfg.tau_quantile, reference)
            })
            .collect::<fdrstep_core::Result<Vec<_>>>()
            .map_err(|e| ConfigError(e.to_string()))?;
        let metrics = self
            .metrics
            .iter()
            .map(|m| m.parse::<Metric>().map_err(|e| ConfigError(format!("metrics: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if metrics.is_empty() {
            return Err(ConfigError("metrics: must list at least one metric".into()));
        }
        Ok((cfg, metrics))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let f = parse_experiment("n = 100\nn0 = 30\ndelta = 0.5\nrho = 0\nseed = 1\n").unwrap();
        assert_eq!(f.iterations, 5000);
        assert_eq!(f.alpha, 0.05);
        assert_eq!(f.tau_quantile, 0.5);
        assert_eq!(f.seed, Some(1));
        let (cfg, metrics) = f.to_experiment(1).unwrap();
        assert_eq!(cfg.procedures.len(), 4);
        assert_eq!(metrics.len(), 3);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_experiment("n = 100\nn0 = 30\ndelta = 0.5\nrho = 0\nalpah = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("alpah"), "{err}");
    }

    #[test]
    fn range_errors_name_the_key() {
        let f = parse_experiment("n = 100\nn0 = 30\ndelta = 0.5\nrho = 1.0\n").unwrap();
        assert!(f.to_experiment(1).unwrap_err().to_string().contains("rho:"));
        let f = parse_experiment("n = 10\nn0 = 30\ndelta = 0.5\nrho = 0.0\n").unwrap();
        assert!(f.to_experiment(1).unwrap_err().to_string().contains("n0:"));
    }

    #[test]
    fn f1_reference_requires_delta() {
        let f = parse_experiment(
            "n = 10\nn0 = 3\ndelta = 0.5\nrho = 0.0\nprocedures = [\"sidak-fnr\"]\n[reference]\nkind = \"f1\"\n",
        )
        .unwrap();
        assert!(f.to_experiment(1).unwrap_err().to_string().contains("reference.delta"));
    }
}
