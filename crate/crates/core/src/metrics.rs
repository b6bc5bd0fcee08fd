//! Outcome accounting, realized FDP/FNP, exact FDR/FNR under independence,
//! the single-step suprema and the two-step upper bounds.
//!
//! Exact evaluators assume independent components. Every joint order-statistic
//! probability they need reduces to a Poisson-binomial law over the other
//! `n - 1` exceedance indicators, so each quantity is computed from
//! leave-one-out pmfs. Dependent models are handled by simulation only.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dist::{location_below, location_exceedance, std_normal_sf, PoissonBinomialPmf};
use crate::error::{Error, Result};
use crate::procedure::{ErrorSide, ReferenceCdf};
use crate::sampler::TruthAssignment;

/// Agreement required between the two exact computation paths.
pub const PATH_TOLERANCE: f64 = 1e-10;

/// Counts from one realized test of `n` hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeTable {
    /// True nulls rejected.
    pub v: usize,
    /// True nulls accepted.
    pub u: usize,
    /// False nulls rejected.
    pub s: usize,
    /// False nulls accepted.
    pub t: usize,
}

impl OutcomeTable {
    pub fn r(&self) -> usize {
        self.v + self.s
    }

    pub fn a(&self) -> usize {
        self.u + self.t
    }

    pub fn n0(&self) -> usize {
        self.v + self.u
    }

    pub fn n1(&self) -> usize {
        self.s + self.t
    }

    pub fn n(&self) -> usize {
        self.r() + self.a()
    }

    /// Table for the single-step rule `x_i >= threshold`.
    pub fn from_threshold(x: &[f64], threshold: f64, null_mask: &[bool]) -> Self {
        let mut table = Self::default();
        for (&xi, &null) in x.iter().zip(null_mask) {
            match (xi >= threshold, null) {
                (true, true) => table.v += 1,
                (false, true) => table.u += 1,
                (true, false) => table.s += 1,
                (false, false) => table.t += 1,
            }
        }
        table
    }
}

pub fn outcome_table(rejected: &[usize], truth: &TruthAssignment) -> Result<OutcomeTable> {
    let n = truth.n();
    let mut mask = vec![false; n];
    for &i in rejected {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        mask[i] = true;
    }
    let mut table = OutcomeTable::default();
    for (i, &rej) in mask.iter().enumerate() {
        match (rej, truth.is_null(i)) {
            (true, true) => table.v += 1,
            (false, true) => table.u += 1,
            (true, false) => table.s += 1,
            (false, false) => table.t += 1,
        }
    }
    Ok(table)
}

/// `V / R`, or 0 when nothing is rejected.
pub fn fdp(table: &OutcomeTable) -> f64 {
    match table.r() {
        0 => 0.0,
        r => table.v as f64 / r as f64,
    }
}

/// `T / A`, or 0 when nothing is accepted.
pub fn fnp(table: &OutcomeTable) -> f64 {
    match table.a() {
        0 => 0.0,
        a => table.t as f64 / a as f64,
    }
}

/// Exact single-step error rates under independence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactErrorRates {
    pub fdr: f64,
    pub fnr: f64,
    /// `P{R > 0}`.
    pub p_any_rejection: f64,
    /// `P{A > 0}`.
    pub p_any_acceptance: f64,
    /// Per-hypothesis FDR contributions; they sum to `P{R > 0}`.
    pub delta_terms: Vec<f64>,
    /// Per-hypothesis FNR contributions; they sum to `P{A > 0}`.
    pub gamma_terms: Vec<f64>,
}

/// Leave-one-out pmfs of "number of other components exceeding", one per
/// component. Components with bit-identical probabilities share a pmf.
struct LeaveOneOut {
    pmfs: Vec<PoissonBinomialPmf>,
    index: Vec<usize>,
}

impl LeaveOneOut {
    fn new(probs: &[f64]) -> Self {
        let mut cache: HashMap<u64, usize> = HashMap::new();
        let mut pmfs = Vec::new();
        let mut index = Vec::with_capacity(probs.len());
        for (i, &p) in probs.iter().enumerate() {
            let slot = *cache.entry(p.to_bits()).or_insert_with(|| {
                let others = probs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &q)| q);
                pmfs.push(PoissonBinomialPmf::from_valid(others));
                pmfs.len() - 1
            });
            index.push(slot);
        }
        Self { pmfs, index }
    }

    fn of(&self, i: usize) -> &PoissonBinomialPmf {
        &self.pmfs[self.index[i]]
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(&bad) => Err(Error::OutOfRange {
            name: "exceedance probability",
            value: bad,
            expected: "[0, 1]",
        }),
        None => Ok(()),
    }
}

/// `delta_i` through the order-statistic expression:
/// `p_i - sum_{j=1}^{n-1} P{X^(-i)_(j) >= t, X_i >= t} / ((n-j)(n-j+1))`.
fn delta_order_statistic(exceed: &[f64], loo: &LeaveOneOut) -> Vec<f64> {
    let n = exceed.len();
    (0..n)
        .map(|i| {
            let survival = loo.of(i).survival();
            let p = exceed[i];
            // X^(-i)_(j) >= t  <=>  at least n - j of the others exceed t.
            let correction: f64 = (1..n)
                .map(|j| {
                    let (a, b) = ((n - j) as f64, (n - j + 1) as f64);
                    p * survival[n - j] / (a * b)
                })
                .sum();
            p - correction
        })
        .collect()
}

/// `delta_i` through the FDP representation: `p_i sum_m P{m others exceed}/(m+1)`.
fn delta_direct(exceed: &[f64], loo: &LeaveOneOut) -> Vec<f64> {
    (0..exceed.len())
        .map(|i| {
            let weights: f64 = loo
                .of(i)
                .pmf()
                .iter()
                .enumerate()
                .map(|(m, &pm)| pm / (m + 1) as f64)
                .sum();
            exceed[i] * weights
        })
        .collect()
}

/// `gamma_i` through the order-statistic expression:
/// `q_i - sum_{j=1}^{n-1} P{X^(-i)_(j) < t, X_i < t} / (j(j+1))`.
fn gamma_order_statistic(exceed: &[f64], loo: &LeaveOneOut) -> Vec<f64> {
    let n = exceed.len();
    (0..n)
        .map(|i| {
            let pmf = loo.of(i).pmf();
            let q = 1.0 - exceed[i];
            // X^(-i)_(j) < t  <=>  at least j of the others are below t
            //                 <=>  at most n - 1 - j of them exceed t.
            let mut at_most = vec![0.0; n];
            let mut acc = 0.0;
            for (m, slot) in at_most.iter_mut().enumerate() {
                acc += pmf[m];
                *slot = acc.min(1.0);
            }
            let correction: f64 = (1..n)
                .map(|j| q * at_most[n - 1 - j] / (j as f64 * (j + 1) as f64))
                .sum();
            q - correction
        })
        .collect()
}

/// `gamma_i` through the FNP representation: `q_i sum_m P{m others below}/(m+1)`.
fn gamma_direct(exceed: &[f64], loo: &LeaveOneOut) -> Vec<f64> {
    let n = exceed.len();
    (0..n)
        .map(|i| {
            let pmf = loo.of(i).pmf();
            // m others below  <=>  n - 1 - m others exceed.
            let weights: f64 = (0..n).map(|m| pmf[n - 1 - m] / (m + 1) as f64).sum();
            (1.0 - exceed[i]) * weights
        })
        .collect()
}

fn masked_sum(terms: &[f64], mask: &[bool], want: bool) -> f64 {
    terms
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m == want)
        .map(|(&x, _)| x)
        .sum()
}

/// FDR through the order-statistic form of the per-hypothesis terms.
pub fn fdr_order_statistic_form(exceed: &[f64], null_mask: &[bool]) -> Result<f64> {
    check_probs(exceed)?;
    let loo = LeaveOneOut::new(exceed);
    Ok(masked_sum(&delta_order_statistic(exceed, &loo), null_mask, true))
}

/// FDR through the `1/(m+1)` decomposition of the FDP.
pub fn fdr_direct_form(exceed: &[f64], null_mask: &[bool]) -> Result<f64> {
    check_probs(exceed)?;
    let loo = LeaveOneOut::new(exceed);
    Ok(masked_sum(&delta_direct(exceed, &loo), null_mask, true))
}

pub fn fnr_order_statistic_form(exceed: &[f64], null_mask: &[bool]) -> Result<f64> {
    check_probs(exceed)?;
    let loo = LeaveOneOut::new(exceed);
    Ok(masked_sum(&gamma_order_statistic(exceed, &loo), null_mask, false))
}

pub fn fnr_direct_form(exceed: &[f64], null_mask: &[bool]) -> Result<f64> {
    check_probs(exceed)?;
    let loo = LeaveOneOut::new(exceed);
    Ok(masked_sum(&gamma_direct(exceed, &loo), null_mask, false))
}

/// Exact rates for independent components with exceedance probabilities
/// `exceed[i] = P{X_i >= t}`. Both computation paths are evaluated and must
/// agree within [`PATH_TOLERANCE`].
pub fn exact_rates_from_probs(exceed: &[f64], null_mask: &[bool]) -> Result<ExactErrorRates> {
    check_probs(exceed)?;
    if exceed.len() != null_mask.len() {
        return Err(Error::InvalidCount(format!(
            "{} probabilities but {} null flags",
            exceed.len(),
            null_mask.len()
        )));
    }
    let loo = LeaveOneOut::new(exceed);
    let delta_terms = delta_order_statistic(exceed, &loo);
    let gamma_terms = gamma_order_statistic(exceed, &loo);
    let fdr = masked_sum(&delta_terms, null_mask, true);
    let fnr = masked_sum(&gamma_terms, null_mask, false);

    let fdr_b = masked_sum(&delta_direct(exceed, &loo), null_mask, true);
    if (fdr - fdr_b).abs() > PATH_TOLERANCE {
        return Err(Error::InconsistentPaths {
            what: "FDR",
            left: fdr,
            right: fdr_b,
        });
    }
    let fnr_b = masked_sum(&gamma_direct(exceed, &loo), null_mask, false);
    if (fnr - fnr_b).abs() > PATH_TOLERANCE {
        return Err(Error::InconsistentPaths {
            what: "FNR",
            left: fnr,
            right: fnr_b,
        });
    }

    let log_none_rejected: f64 = exceed.iter().map(|&p| (-p).ln_1p()).sum();
    let log_none_accepted: f64 = exceed.iter().map(|&p| p.ln()).sum();
    Ok(ExactErrorRates {
        fdr: fdr.clamp(0.0, 1.0),
        fnr: fnr.clamp(0.0, 1.0),
        p_any_rejection: -log_none_rejected.exp_m1(),
        p_any_acceptance: -log_none_accepted.exp_m1(),
        delta_terms,
        gamma_terms,
    })
}

/// Exact FDR, FNR and their per-hypothesis terms of the single-step rule
/// `X_i >= t` for independent normal components shifted per `truth`.
pub fn exact_error_rates(t: f64, truth: &TruthAssignment) -> Result<ExactErrorRates> {
    let exceed: Vec<f64> = truth.shifts().iter().map(|&mu| location_exceedance(t, mu)).collect();
    exact_rates_from_probs(&exceed, truth.null_mask())
}

/// Alias of [`exact_error_rates`]; the FDR is in `.fdr`.
pub fn exact_fdr_independent(t: f64, truth: &TruthAssignment) -> Result<ExactErrorRates> {
    exact_error_rates(t, truth)
}

/// Alias of [`exact_error_rates`]; the FNR is in `.fnr`.
pub fn exact_fnr_independent(t: f64, truth: &TruthAssignment) -> Result<ExactErrorRates> {
    exact_error_rates(t, truth)
}

/// `1 - F^n` written as `-expm1(n ln1p(-(1 - F)))`.
fn one_minus_power(complement: f64, n: usize) -> f64 {
    -(n as f64 * (-complement).ln_1p()).exp_m1()
}

/// Supremum of the single-step FDR over the parameter space,
/// `(n0/n) (1 - F0(t)^n)`, under independence and exchangeability at the null.
pub fn sup_fdr_single_step(n0: usize, n: usize, t: f64) -> Result<f64> {
    if n0 == 0 || n0 > n {
        return Err(Error::InvalidCount(format!(
            "need 1 <= n0 <= n, got n0 = {n0}, n = {n}"
        )));
    }
    Ok(n0 as f64 / n as f64 * one_minus_power(location_exceedance(t, 0.0), n))
}

/// Supremum of the single-step FNR, `(n1/n) (1 - (1 - F_ref(t))^n)`.
pub fn sup_fnr_single_step(n1: usize, n: usize, t: f64, reference: ReferenceCdf) -> Result<f64> {
    if n == 0 || n1 > n {
        return Err(Error::InvalidCount(format!(
            "need 0 <= n1 <= n, n >= 1, got n1 = {n1}, n = {n}"
        )));
    }
    Ok(n1 as f64 / n as f64 * one_minus_power(reference.cdf(t), n))
}

fn validated_thresholds(n: usize, tau: f64, side: ErrorSide, thresholds: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    (0..=n)
        .map(|k| {
            let t = thresholds(k);
            if side.admits(t, tau) {
                Ok(t)
            } else {
                Err(Error::ThresholdConstraint {
                    k,
                    threshold: t,
                    tau,
                    side: match side {
                        ErrorSide::Fdr => "t(k) >= tau",
                        ErrorSide::Fnr => "t(k) <= tau",
                    },
                })
            }
        })
        .collect()
}

/// Leave-one-out pmfs of "number of other components below tau".
fn below_tau_loo(tau: f64, truth: &TruthAssignment) -> LeaveOneOut {
    let below: Vec<f64> = truth.shifts().iter().map(|&mu| location_below(tau, mu)).collect();
    LeaveOneOut::new(&below)
}

/// `(1/m) [1 - (1 - r)^m]` with `r` clamped to `[0, 1]`.
fn conditional_sup(r: f64, m: usize) -> f64 {
    one_minus_power(r.clamp(0.0, 1.0), m) / m as f64
}

/// Upper bound on the FDR of a two-step procedure with `t(k) >= tau`:
///
/// `(1 - F0(tau)) sum_{i in J0} sum_{k=0}^{n-1} (1/(n-k)) [1 - (1 - r_k)^(n-k)] P{k others < tau}`
///
/// with `r_k = (1 - F0(t(k))) / (1 - F0(tau))`.
pub fn two_step_fdr_bound(thresholds: impl Fn(usize) -> f64, tau: f64, truth: &TruthAssignment) -> Result<f64> {
    let n = truth.n();
    let table = validated_thresholds(n, tau, ErrorSide::Fdr, thresholds)?;
    let upper_tau = location_exceedance(tau, 0.0);
    if upper_tau == 0.0 {
        return Ok(0.0);
    }
    let coef: Vec<f64> = (0..n)
        .map(|k| conditional_sup(location_exceedance(table[k], 0.0) / upper_tau, n - k))
        .collect();
    let loo = below_tau_loo(tau, truth);
    let total: f64 = truth
        .null_indices()
        .into_iter()
        .map(|i| {
            let pmf = loo.of(i).pmf();
            coef.iter().zip(pmf).map(|(c, p)| c * p).sum::<f64>()
        })
        .sum();
    Ok(upper_tau * total)
}

/// The looser linear bound `sum_{i in J0} sum_k (1 - F0(t(k))) P{k others < tau}`.
/// Diagnostic only.
pub fn two_step_fdr_linear_bound(thresholds: impl Fn(usize) -> f64, tau: f64, truth: &TruthAssignment) -> Result<f64> {
    let n = truth.n();
    let table = validated_thresholds(n, tau, ErrorSide::Fdr, thresholds)?;
    let loo = below_tau_loo(tau, truth);
    Ok(truth
        .null_indices()
        .into_iter()
        .map(|i| {
            let pmf = loo.of(i).pmf();
            (0..n).map(|k| std_normal_sf(table[k]) * pmf[k]).sum::<f64>()
        })
        .sum())
}

/// Upper bound on the FNR of a two-step procedure with `t(k) <= tau`:
///
/// `F(tau) sum_{i in J1} sum_{k=1}^{n} (1/k) [1 - (1 - F(t(k))/F(tau))^k] P{k-1 others < tau}`
///
/// where `F` is the reference CDF (`F0`, or `F1` for a prespecified alternative).
pub fn two_step_fnr_bound(
    thresholds: impl Fn(usize) -> f64,
    tau: f64,
    truth: &TruthAssignment,
    reference: ReferenceCdf,
) -> Result<f64> {
    let n = truth.n();
    let table = validated_thresholds(n, tau, ErrorSide::Fnr, thresholds)?;
    let lower_tau = reference.cdf(tau);
    if lower_tau == 0.0 {
        return Ok(0.0);
    }
    let coef: Vec<f64> = (1..=n)
        .map(|k| conditional_sup(reference.cdf(table[k]) / lower_tau, k))
        .collect();
    let loo = below_tau_loo(tau, truth);
    let total: f64 = truth
        .alt_indices()
        .into_iter()
        .map(|i| {
            let pmf = loo.of(i).pmf();
            coef.iter().zip(pmf).map(|(c, p)| c * p).sum::<f64>()
        })
        .sum();
    Ok(lower_tau * total)
}

/// The looser linear bound `sum_{i in J1} sum_k F(t(k)) P{k-1 others < tau}`.
pub fn two_step_fnr_linear_bound(
    thresholds: impl Fn(usize) -> f64,
    tau: f64,
    truth: &TruthAssignment,
    reference: ReferenceCdf,
) -> Result<f64> {
    let n = truth.n();
    let table = validated_thresholds(n, tau, ErrorSide::Fnr, thresholds)?;
    let loo = below_tau_loo(tau, truth);
    Ok(truth
        .alt_indices()
        .into_iter()
        .map(|i| {
            let pmf = loo.of(i).pmf();
            (1..=n).map(|k| reference.cdf(table[k]) * pmf[k - 1]).sum::<f64>()
        })
        .sum())
}

/// `P{X_(1) < tau}` for independent components.
pub fn prob_min_below(tau: f64, truth: &TruthAssignment) -> f64 {
    let log_all_above: f64 = truth.shifts().iter().map(|&mu| location_exceedance(tau, mu).ln()).sum();
    -log_all_above.exp_m1()
}

/// `P{X_(n) >= tau}` for independent components.
pub fn prob_max_at_least(tau: f64, truth: &TruthAssignment) -> f64 {
    let log_all_below: f64 = truth.shifts().iter().map(|&mu| location_below(tau, mu).ln()).sum();
    -log_all_below.exp_m1()
}

/// `1 - FDR - FNR`. Negative values mark a biased procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Power {
    pub value: f64,
    pub biased: bool,
}

pub fn power_pi(fdr: f64, fnr: f64) -> Power {
    let value = 1.0 - fdr - fnr;
    Power {
        value,
        biased: value < 0.0,
    }
}
