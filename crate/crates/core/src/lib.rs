//! Bonferroni- and Sidak-type multiple testing procedures for controlling the
//! false discovery rate (FDR) or the false nondiscovery rate (FNR) of
//! one-sided normal location tests.
//!
//! Statistics are `X_i ~ N(mu_i, 1)` with `mu_i = 0` under the null and
//! `mu_i = delta > 0` otherwise; large values are evidence against the null.
//! The crate provides:
//!
//! * [`procedure`]: single-step and data-adaptive two-step thresholds.
//! * [`metrics`]: exact FDR/FNR under independence, suprema and two-step bounds.
//! * [`sampler`]: seeded equicorrelated and mixture-model data.
//! * [`simulation`]: the Monte-Carlo harness and its CSV output.
//! * [`mixture`]: posterior error rates and q-values in the two-point mixture.

pub mod dist;
pub mod error;
pub mod metrics;
pub mod mixture;
pub mod procedure;
pub mod sampler;
pub mod simulation;

pub use dist::{std_normal_cdf, std_normal_quantile, std_normal_sf, InfiniteQuantile, PoissonBinomialPmf, Probability};
pub use error::{Error, Result};
pub use metrics::{exact_error_rates, fdp, fnp, ExactErrorRates, OutcomeTable, Power};
pub use mixture::MixtureConfig;
pub use procedure::{
    CompiledProcedure, ErrorSide, ProcedureKind, ProcedureSpec, ReferenceCdf, RejectionSet, ThresholdTable,
};
pub use sampler::{Seed, TruthAssignment};
pub use simulation::{ExperimentConfig, FactorialDesign, Metric, ResultGrid};
