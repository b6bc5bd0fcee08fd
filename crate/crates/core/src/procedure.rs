//! Single-step and two-step Bonferroni/Sidak procedures for FDR and FNR.
//!
//! Every procedure rejects `H_i` when `x_i >= t`. Single-step procedures use
//! a fixed `t`; two-step procedures first count `k = #{i : x_i < tau}` and
//! then use `t = t_tau(k)`. Threshold levels are formed in probability space
//! (upper-tail levels for FDR, lower-tail levels for FNR) and converted to the
//! statistic scale only at the end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{std_normal_cdf, std_normal_quantile, std_normal_sf, threshold_at_upper_level, LocationModel};
use crate::error::{Error, Result};

/// Which error rate a procedure is built to control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorSide {
    Fdr,
    Fnr,
}

impl ErrorSide {
    fn constraint_name(self) -> &'static str {
        match self {
            Self::Fdr => "t(k) >= tau",
            Self::Fnr => "t(k) <= tau",
        }
    }

    /// Whether `threshold` is admissible for a two-step procedure on this side.
    pub fn admits(self, threshold: f64, tau: f64) -> bool {
        match self {
            Self::Fdr => threshold >= tau,
            Self::Fnr => threshold <= tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcedureKind {
    BonferroniFdr,
    SidakFdr,
    ModifiedBonferroniFdr,
    ModifiedSidakFdr,
    BonferroniFnr,
    SidakFnr,
    ModifiedBonferroniFnr,
    ModifiedSidakFnr,
}

impl ProcedureKind {
    pub const ALL: [Self; 8] = [
        Self::BonferroniFdr,
        Self::SidakFdr,
        Self::ModifiedBonferroniFdr,
        Self::ModifiedSidakFdr,
        Self::BonferroniFnr,
        Self::SidakFnr,
        Self::ModifiedBonferroniFnr,
        Self::ModifiedSidakFnr,
    ];

    /// The four FDR procedures in table order.
    pub const FDR: [Self; 4] = [
        Self::BonferroniFdr,
        Self::ModifiedBonferroniFdr,
        Self::SidakFdr,
        Self::ModifiedSidakFdr,
    ];

    pub const FNR: [Self; 4] = [
        Self::BonferroniFnr,
        Self::ModifiedBonferroniFnr,
        Self::SidakFnr,
        Self::ModifiedSidakFnr,
    ];

    pub fn side(self) -> ErrorSide {
        match self {
            Self::BonferroniFdr | Self::SidakFdr | Self::ModifiedBonferroniFdr | Self::ModifiedSidakFdr => {
                ErrorSide::Fdr
            }
            _ => ErrorSide::Fnr,
        }
    }

    pub fn is_two_step(self) -> bool {
        matches!(
            self,
            Self::ModifiedBonferroniFdr | Self::ModifiedSidakFdr | Self::ModifiedBonferroniFnr | Self::ModifiedSidakFnr
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::BonferroniFdr => "bonferroni-fdr",
            Self::SidakFdr => "sidak-fdr",
            Self::ModifiedBonferroniFdr => "mod-bonferroni-fdr",
            Self::ModifiedSidakFdr => "mod-sidak-fdr",
            Self::BonferroniFnr => "bonferroni-fnr",
            Self::SidakFnr => "sidak-fnr",
            Self::ModifiedBonferroniFnr => "mod-bonferroni-fnr",
            Self::ModifiedSidakFnr => "mod-sidak-fnr",
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcedureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown procedure '{s}'")))
    }
}

/// Distribution used to calibrate FNR thresholds: the null `F0`, or the
/// prespecified alternative `F1(x) = F0(x - delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum ReferenceCdf {
    #[default]
    F0,
    F1 {
        delta: f64,
    },
}

impl ReferenceCdf {
    pub fn model(self) -> LocationModel {
        match self {
            Self::F0 => LocationModel::STANDARD,
            Self::F1 { delta } => LocationModel { shift: delta },
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        crate::dist::location_below(x, self.model().shift)
    }

    pub fn sf(self, x: f64) -> f64 {
        crate::dist::location_exceedance(x, self.model().shift)
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::F0 => Ok(()),
            Self::F1 { delta } if delta.is_finite() => Ok(()),
            Self::F1 { delta } => Err(Error::OutOfRange {
                name: "reference delta",
                value: delta,
                expected: "a finite real",
            }),
        }
    }
}

fn check_level(name: &'static str, level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: level,
            expected: "(0, 1)",
        })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidCount("n must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k > n {
        Err(Error::InvalidCount(format!("k = {k} exceeds n = {n}")))
    } else {
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "tau",
            value: tau,
            expected: "a finite real",
        })
    }
}

/// `1 - (1 - m)^(1/root)` without cancellation for small `m`.
fn sidak_level(m: f64, root: usize) -> f64 {
    -(f64::ln_1p(-m) / root as f64).exp_m1()
}

/// `t` with `F0(t) = 1 - alpha/n`.
pub fn bonferroni_fdr_threshold(alpha: f64, n: usize) -> Result<f64> {
    check_level("alpha", alpha)?;
    check_n(n)?;
    threshold_at_upper_level(alpha / n as f64)
}

/// `t` with `F0(t) = (1 - alpha)^(1/n)`.
pub fn sidak_fdr_threshold(alpha: f64, n: usize) -> Result<f64> {
    check_level("alpha", alpha)?;
    check_n(n)?;
    threshold_at_upper_level(sidak_level(alpha, n))
}

/// Two-step modified Bonferroni threshold for `K_tau = k`:
/// `1 - F0(t) = min{1 - F0(tau), alpha F0(tau) / (k + 1)}`, so `t >= tau`.
pub fn modified_bonferroni_fdr_threshold(k: usize, alpha: f64, tau: f64) -> Result<f64> {
    check_level("alpha", alpha)?;
    check_tau(tau)?;
    let upper_tau = std_normal_sf(tau);
    let level = alpha * std_normal_cdf(tau) / (k as f64 + 1.0);
    if level >= upper_tau {
        return Ok(tau);
    }
    Ok(threshold_at_upper_level(level)?.max(tau))
}

/// Modified Bonferroni FDR procedure applied to `x`.
pub fn modified_bonferroni_fdr(x: &[f64], alpha: f64, tau: f64) -> Result<RejectionSet> {
    check_level("alpha", alpha)?;
    check_tau(tau)?;
    apply_two_step(
        x,
        tau,
        |k| modified_bonferroni_fdr_threshold(k, alpha, tau).unwrap_or(f64::NAN),
        ErrorSide::Fdr,
    )
}

/// Two-step modified Sidak FDR threshold for `k` observations below `tau`;
/// `+inf` when `k = n`.
pub fn modified_sidak_fdr_threshold(k: usize, n: usize, alpha: f64, tau: f64) -> Result<f64> {
    check_level("alpha", alpha)?;
    check_n(n)?;
    check_k(k, n)?;
    check_tau(tau)?;
    if k == n {
        return Ok(f64::INFINITY);
    }
    let upper_tau = std_normal_sf(tau);
    let remaining = n - k;
    let m = alpha * remaining as f64 * std_normal_cdf(tau) / ((k as f64 + 1.0) * upper_tau);
    if m >= 1.0 {
        return Ok(tau);
    }
    Ok(threshold_at_upper_level(upper_tau * sidak_level(m, remaining))?.max(tau))
}

/// `t` with `F_ref(t) = beta/n`.
pub fn bonferroni_fnr_threshold(beta: f64, n: usize, reference: ReferenceCdf) -> Result<f64> {
    check_level("beta", beta)?;
    check_n(n)?;
    reference.validate()?;
    reference.model().quantile(beta / n as f64)
}

/// `t` with `F_ref(t) = 1 - (1 - beta)^(1/n)`.
pub fn sidak_fnr_threshold(beta: f64, n: usize, reference: ReferenceCdf) -> Result<f64> {
    check_level("beta", beta)?;
    check_n(n)?;
    reference.validate()?;
    reference.model().quantile(sidak_level(beta, n))
}

/// Two-step modified Sidak FNR threshold for `k` observations below `tau`;
/// `-inf` when `k = 0`.
pub fn modified_sidak_fnr_threshold(k: usize, n: usize, beta: f64, tau: f64, reference: ReferenceCdf) -> Result<f64> {
    check_level("beta", beta)?;
    check_n(n)?;
    check_k(k, n)?;
    check_tau(tau)?;
    reference.validate()?;
    if k == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let lower_tau = reference.cdf(tau);
    let upper_tau = reference.sf(tau);
    if lower_tau == 0.0 {
        return Ok(tau);
    }
    let m = beta * k as f64 * upper_tau / ((n - k + 1) as f64 * lower_tau);
    if m >= 1.0 {
        return Ok(tau);
    }
    Ok(reference.model().quantile(lower_tau * sidak_level(m, k))?.min(tau))
}

/// Two-step modified Bonferroni FNR threshold:
/// `F_ref(t) = min{F_ref(tau), beta (1 - F_ref(tau)) / (n - k + 1)}`; `-inf` when `k = 0`.
pub fn modified_bonferroni_fnr_threshold(
    k: usize,
    n: usize,
    beta: f64,
    tau: f64,
    reference: ReferenceCdf,
) -> Result<f64> {
    check_level("beta", beta)?;
    check_n(n)?;
    check_k(k, n)?;
    check_tau(tau)?;
    reference.validate()?;
    if k == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let lower_tau = reference.cdf(tau);
    let level = beta * reference.sf(tau) / (n - k + 1) as f64;
    if level >= lower_tau {
        return Ok(tau);
    }
    Ok(reference.model().quantile(level)?.min(tau))
}

/// Outcome of applying a procedure to one vector of statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionSet {
    /// Zero-based indices with `x_i >= threshold_used`, ascending.
    pub rejected: Vec<usize>,
    pub threshold_used: f64,
    /// Realized `K_tau` for two-step procedures.
    pub k_observed: Option<usize>,
}

impl RejectionSet {
    fn from_threshold(x: &[f64], threshold: f64, k_observed: Option<usize>) -> Self {
        let rejected = x
            .iter()
            .enumerate()
            .filter(|(_, &xi)| xi >= threshold)
            .map(|(i, _)| i)
            .collect();
        Self {
            rejected,
            threshold_used: threshold,
            k_observed,
        }
    }

    pub fn len(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }
}

/// `#{i : x_i < tau}`; ties at `tau` are not counted.
pub fn count_below(x: &[f64], tau: f64) -> usize {
    x.iter().filter(|&&xi| xi < tau).count()
}

/// Generic two-step rule: count `k` below `tau`, then reject `x_i >= t(k)`.
///
/// The realized threshold must satisfy the side's constraint relative to `tau`.
pub fn apply_two_step(
    x: &[f64],
    tau: f64,
    threshold_of_k: impl Fn(usize) -> f64,
    side: ErrorSide,
) -> Result<RejectionSet> {
    let k = count_below(x, tau);
    let t = threshold_of_k(k);
    if !side.admits(t, tau) {
        return Err(Error::ThresholdConstraint {
            k,
            threshold: t,
            tau,
            side: side.constraint_name(),
        });
    }
    Ok(RejectionSet::from_threshold(x, t, Some(k)))
}

/// Precomputed `t_tau(k)` for `k = 0..=n`, validated against the side constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    tau: f64,
    side: ErrorSide,
    thresholds: Vec<f64>,
}

impl ThresholdTable {
    pub fn new(n: usize, tau: f64, side: ErrorSide, threshold_of_k: impl Fn(usize) -> Result<f64>) -> Result<Self> {
        let thresholds = (0..=n).map(&threshold_of_k).collect::<Result<Vec<_>>>()?;
        Self::from_values(tau, side, thresholds)
    }

    pub fn from_values(tau: f64, side: ErrorSide, thresholds: Vec<f64>) -> Result<Self> {
        if let Some((k, &t)) = thresholds.iter().enumerate().find(|(_, &t)| !side.admits(t, tau)) {
            return Err(Error::ThresholdConstraint {
                k,
                threshold: t,
                tau,
                side: side.constraint_name(),
            });
        }
        Ok(Self { tau, side, thresholds })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn side(&self) -> ErrorSide {
        self.side
    }

    pub fn n(&self) -> usize {
        self.thresholds.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.thresholds[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.thresholds
    }
}

/// Full description of one procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureSpec {
    pub kind: ProcedureKind,
    /// `alpha` for FDR kinds, `beta` for FNR kinds.
    pub level: f64,
    pub n: usize,
    /// Defines `tau` through `F0(tau) = tau_quantile`; used by two-step kinds.
    pub tau_quantile: f64,
    /// Calibration distribution for FNR kinds; ignored by FDR kinds.
    pub reference: ReferenceCdf,
}

impl ProcedureSpec {
    pub fn new(kind: ProcedureKind, level: f64, n: usize, tau_quantile: f64, reference: ReferenceCdf) -> Result<Self> {
        let spec = Self {
            kind,
            level,
            n,
            tau_quantile,
            reference,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// FDR procedure with the default reference.
    pub fn fdr(kind: ProcedureKind, alpha: f64, n: usize, tau_quantile: f64) -> Result<Self> {
        Self::new(kind, alpha, n, tau_quantile, ReferenceCdf::F0)
    }

    pub fn validate(&self) -> Result<()> {
        check_level(
            match self.kind.side() {
                ErrorSide::Fdr => "alpha",
                ErrorSide::Fnr => "beta",
            },
            self.level,
        )?;
        check_n(self.n)?;
        check_level("tau_quantile", self.tau_quantile)?;
        self.reference.validate()
    }

    pub fn tau(&self) -> f64 {
        // tau_quantile is validated to lie in (0, 1).
        std_normal_quantile(self.tau_quantile).unwrap_or(f64::NAN)
    }

    /// Identifier used in CSV output, e.g. `mod-sidak-fnr-f1`.
    pub fn label(&self) -> String {
        match (self.kind.side(), self.reference) {
            (ErrorSide::Fnr, ReferenceCdf::F1 { .. }) => format!("{}-f1", self.kind.name()),
            _ => self.kind.name().to_string(),
        }
    }

    pub fn compile(&self) -> Result<CompiledProcedure> {
        self.validate()?;
        let (n, level, reference) = (self.n, self.level, self.reference);
        let tau = self.tau();
        Ok(match self.kind {
            ProcedureKind::BonferroniFdr => CompiledProcedure::single(bonferroni_fdr_threshold(level, n)?),
            ProcedureKind::SidakFdr => CompiledProcedure::single(sidak_fdr_threshold(level, n)?),
            ProcedureKind::BonferroniFnr => CompiledProcedure::single(bonferroni_fnr_threshold(level, n, reference)?),
            ProcedureKind::SidakFnr => CompiledProcedure::single(sidak_fnr_threshold(level, n, reference)?),
            ProcedureKind::ModifiedBonferroniFdr => {
                CompiledProcedure::TwoStep(ThresholdTable::new(n, tau, ErrorSide::Fdr, |k| {
                    modified_bonferroni_fdr_threshold(k, level, tau)
                })?)
            }
            ProcedureKind::ModifiedSidakFdr => {
                CompiledProcedure::TwoStep(ThresholdTable::new(n, tau, ErrorSide::Fdr, |k| {
                    modified_sidak_fdr_threshold(k, n, level, tau)
                })?)
            }
            ProcedureKind::ModifiedBonferroniFnr => {
                CompiledProcedure::TwoStep(ThresholdTable::new(n, tau, ErrorSide::Fnr, |k| {
                    modified_bonferroni_fnr_threshold(k, n, level, tau, reference)
                })?)
            }
            ProcedureKind::ModifiedSidakFnr => {
                CompiledProcedure::TwoStep(ThresholdTable::new(n, tau, ErrorSide::Fnr, |k| {
                    modified_sidak_fnr_threshold(k, n, level, tau, reference)
                })?)
            }
        })
    }

    pub fn apply(&self, x: &[f64]) -> Result<RejectionSet> {
        self.compile()?.apply(x)
    }
}

/// A procedure with all thresholds precomputed, ready for repeated use.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledProcedure {
    SingleStep { threshold: f64 },
    TwoStep(ThresholdTable),
}

impl CompiledProcedure {
    pub fn single(threshold: f64) -> Self {
        Self::SingleStep { threshold }
    }

    /// The threshold this procedure uses on `x`, with the realized `k` for
    /// two-step rules. `x.len()` must equal the table's `n` for two-step rules.
    #[inline]
    pub fn threshold_for(&self, x: &[f64]) -> (f64, Option<usize>) {
        match self {
            Self::SingleStep { threshold } => (*threshold, None),
            Self::TwoStep(table) => {
                let k = count_below(x, table.tau());
                (table.get(k), Some(k))
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<RejectionSet> {
        if let Self::TwoStep(table) = self {
            if x.len() != table.n() {
                return Err(Error::InvalidCount(format!(
                    "procedure compiled for n = {} applied to {} statistics",
                    table.n(),
                    x.len()
                )));
            }
        }
        let (t, k) = self.threshold_for(x);
        Ok(RejectionSet::from_threshold(x, t, k))
    }
}
