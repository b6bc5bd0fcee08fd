//! Shared fixtures for the benchmarks.

use fdrstep_core::{ExperimentConfig, TruthAssignment};

/// Truth assignment with the last `n / 2` hypotheses false, shifted by 1.5.
pub fn half_alternatives(n: usize) -> TruthAssignment {
    TruthAssignment::last_alternatives(n, n - n / 2, 1.5).expect("valid fixture")
}

/// One scenario of the default design with a reduced iteration count.
pub fn fdr_scenario(rho: f64, iterations: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::fdr_cell(100, 50, 1.5, rho, 20240101).expect("valid fixture");
    cfg.iterations = iterations;
    cfg
}
