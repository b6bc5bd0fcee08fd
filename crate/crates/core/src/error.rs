use thiserror::Error;

use crate::dist::InfiniteQuantile;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range, expected {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("quantile is infinite ({0:?})")]
    InfiniteQuantile(InfiniteQuantile),

    #[error("index {index} out of range for {n} hypotheses")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("threshold t({k}) = {threshold} violates the {side} constraint relative to tau = {tau}")]
    ThresholdConstraint {
        k: usize,
        threshold: f64,
        tau: f64,
        side: &'static str,
    },

    #[error("{what}: computation paths disagree ({left} vs {right})")]
    InconsistentPaths { what: &'static str, left: f64, right: f64 },

    #[error("undefined conditional rate: no iteration had {0}")]
    UndefinedConditionalRate(&'static str),

    #[error("exact evaluation requires independence, got rho = {0}")]
    DependenceNotSupported(f64),

    #[error("posterior undefined at t = {0}")]
    UndefinedPosterior(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
