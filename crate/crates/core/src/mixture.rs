//! Two-point normal mixture: `H_i ~ Bernoulli(1 - pi0)` independently and
//! `X_i | H ~ N(H_i delta, 1)` with common correlation `rho`.
//!
//! Closed-form posteriors, the q-value, the exact right-hand sides of the
//! FDR/FNR mixture bounds under independence, and Monte-Carlo estimates of
//! pFDR/pFNR for any `rho`.

use serde::{Deserialize, Serialize};

use crate::dist::{location_below, location_exceedance, std_normal_log_cdf, std_normal_log_sf, Probability};
use crate::error::{Error, Result};
use crate::metrics::{exact_rates_from_probs, fdp, fnp, OutcomeTable};
use crate::sampler::{MixtureSampler, Seed};
use crate::simulation::{mean_and_se, parallel_map};

/// Spacing and reach of the q-value grid search.
pub const Q_VALUE_GRID_STEP: f64 = 1e-3;
pub const Q_VALUE_GRID_REACH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub n: usize,
    /// Prior probability that a hypothesis is a true null.
    pub pi0: Probability,
    /// Alternative shift. Zero is accepted by the posterior functions as the
    /// degenerate "indistinguishable" case; sampling needs `delta > 0`.
    pub delta: f64,
    pub rho: f64,
    /// Rejection threshold of the single-step rule `X_i >= t`.
    pub t: f64,
}

impl MixtureConfig {
    pub fn new(n: usize, pi0: f64, delta: f64, rho: f64, t: f64) -> Result<Self> {
        let cfg = Self {
            n,
            pi0: Probability::new(pi0)?,
            delta,
            rho,
            t,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidCount("n must be at least 1".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: self.delta,
                expected: "[0, inf)",
            });
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::OutOfRange {
                name: "rho",
                value: self.rho,
                expected: "[0, 1)",
            });
        }
        if self.t.is_nan() {
            return Err(Error::OutOfRange {
                name: "t",
                value: self.t,
                expected: "a real or +-inf",
            });
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self { t, ..*self }
    }

    fn log_prior_odds(&self) -> Result<(f64, f64)> {
        let pi0 = self.pi0.value();
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::OutOfRange {
                name: "pi0",
                value: pi0,
                expected: "(0, 1)",
            });
        }
        Ok((pi0.ln(), (1.0 - pi0).ln()))
    }

    /// Marginal `P{X_i >= t}`.
    pub fn marginal_exceedance(&self) -> f64 {
        let pi0 = self.pi0.value();
        pi0 * location_exceedance(self.t, 0.0) + (1.0 - pi0) * location_exceedance(self.t, self.delta)
    }
}

/// `1 / (1 + exp(log_other - log_self))`, stable for large differences.
fn logistic_share(log_self: f64, log_other: f64) -> f64 {
    let d = log_other - log_self;
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// `P{H = 0 | X >= t}`.
pub fn posterior_null_given_exceed(cfg: &MixtureConfig) -> Result<f64> {
    let (ln_pi0, ln_pi1) = cfg.log_prior_odds()?;
    if cfg.t == f64::INFINITY {
        return Err(Error::UndefinedPosterior(cfg.t));
    }
    Ok(logistic_share(
        ln_pi0 + std_normal_log_sf(cfg.t),
        ln_pi1 + std_normal_log_sf(cfg.t - cfg.delta),
    ))
}

/// `P{H = 0 | X < t}`.
pub fn posterior_null_given_accept(cfg: &MixtureConfig) -> Result<f64> {
    let (ln_pi0, ln_pi1) = cfg.log_prior_odds()?;
    if cfg.t == f64::NEG_INFINITY {
        return Err(Error::UndefinedPosterior(cfg.t));
    }
    Ok(logistic_share(
        ln_pi0 + std_normal_log_cdf(cfg.t),
        ln_pi1 + std_normal_log_cdf(cfg.t - cfg.delta),
    ))
}

/// `P{H = 1 | X < t}`.
pub fn posterior_alt_given_accept(cfg: &MixtureConfig) -> Result<f64> {
    let (ln_pi0, ln_pi1) = cfg.log_prior_odds()?;
    if cfg.t == f64::NEG_INFINITY {
        return Err(Error::UndefinedPosterior(cfg.t));
    }
    Ok(logistic_share(
        ln_pi1 + std_normal_log_cdf(cfg.t - cfg.delta),
        ln_pi0 + std_normal_log_cdf(cfg.t),
    ))
}

/// `inf_{x <= t} P{H = 0 | X >= x}`.
///
/// Grid search over `[t - 20, t]` at spacing `1e-3`, followed by a golden-section
/// refinement around the best grid point. Monotonicity of the posterior is not
/// assumed.
pub fn q_value(cfg: &MixtureConfig) -> Result<f64> {
    let at_t = posterior_null_given_exceed(cfg)?;
    let upper = if cfg.t.is_finite() { cfg.t } else { 0.0 };
    if cfg.t == f64::NEG_INFINITY {
        return Ok(at_t);
    }
    let steps = (Q_VALUE_GRID_REACH / Q_VALUE_GRID_STEP).round() as usize;
    let posterior = |x: f64| posterior_null_given_exceed(&cfg.with_t(x));
    let mut best = (0usize, at_t);
    for j in 1..=steps {
        let v = posterior(upper - j as f64 * Q_VALUE_GRID_STEP)?;
        if v < best.1 {
            best = (j, v);
        }
    }
    let centre = upper - best.0 as f64 * Q_VALUE_GRID_STEP;
    let lo = centre - Q_VALUE_GRID_STEP;
    let hi = (centre + Q_VALUE_GRID_STEP).min(upper);
    let refined = golden_section_min(|x| posterior(x).unwrap_or(f64::INFINITY), lo, hi, 60);
    Ok(best.1.min(refined).min(at_t))
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// A Monte-Carlo conditional expectation such as `E(V/R | R > 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRate {
    pub estimate: f64,
    /// Sample SD over the conditioning iterations divided by the square root
    /// of their number.
    pub standard_error: f64,
    pub conditioning_count: usize,
}

impl ConditionalRate {
    fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (estimate, standard_error) = mean_and_se(values);
        Some(Self {
            estimate,
            standard_error,
            conditioning_count: values.len(),
        })
    }
}

/// Unconditional and conditional rates from one mixture simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSimulation {
    pub iterations: usize,
    pub fdr: f64,
    pub fdr_se: f64,
    pub fnr: f64,
    pub fnr_se: f64,
    pub pfdr: Option<ConditionalRate>,
    pub pfnr: Option<ConditionalRate>,
}

/// Simulates the single-step rule `X_i >= t` under the mixture model.
/// Iteration `i` draws from stream `Seed::new(master_seed, i)`.
pub fn simulate_mixture(
    cfg: &MixtureConfig,
    iterations: usize,
    master_seed: u64,
    workers: usize,
) -> Result<MixtureSimulation> {
    cfg.validate()?;
    if iterations == 0 {
        return Err(Error::InvalidCount("iterations must be at least 1".into()));
    }
    let sampler = MixtureSampler::new(cfg.pi0, cfg.delta, cfg.rho)?;
    let n = cfg.n;
    let tables = parallel_map(iterations, workers, |i| {
        let mut rng = Seed::new(master_seed, i as u64).rng();
        let (mut h, mut means, mut x) = (vec![false; n], vec![0.0; n], vec![0.0; n]);
        sampler.fill(&mut rng, &mut h, &mut means, &mut x);
        let null_mask: Vec<bool> = h.iter().map(|&alt| !alt).collect();
        OutcomeTable::from_threshold(&x, cfg.t, &null_mask)
    });
    let q: Vec<f64> = tables.iter().map(fdp).collect();
    let nn: Vec<f64> = tables.iter().map(fnp).collect();
    let q_given_r: Vec<f64> = tables.iter().filter(|t| t.r() > 0).map(fdp).collect();
    let n_given_a: Vec<f64> = tables.iter().filter(|t| t.a() > 0).map(fnp).collect();
    let (fdr, fdr_se) = mean_and_se(&q);
    let (fnr, fnr_se) = mean_and_se(&nn);
    Ok(MixtureSimulation {
        iterations,
        fdr,
        fdr_se,
        fnr,
        fnr_se,
        pfdr: ConditionalRate::from_values(&q_given_r),
        pfnr: ConditionalRate::from_values(&n_given_a),
    })
}

/// Monte-Carlo `(pFDR, pFNR)`; fails if no iteration had a rejection
/// (resp. an acceptance).
pub fn estimate_pfdr_pfnr(
    cfg: &MixtureConfig,
    iterations: usize,
    master_seed: u64,
    workers: usize,
) -> Result<(ConditionalRate, ConditionalRate)> {
    let sim = simulate_mixture(cfg, iterations, master_seed, workers)?;
    let pfdr = sim.pfdr.ok_or(Error::UndefinedConditionalRate("R > 0"))?;
    let pfnr = sim.pfnr.ok_or(Error::UndefinedConditionalRate("A > 0"))?;
    Ok((pfdr, pfnr))
}

/// Monte-Carlo `inf_{x in grid} pFDR(x, n)` using common draws across the
/// grid. Returns the estimate at the minimizing grid point.
pub fn estimate_q_value(
    cfg: &MixtureConfig,
    grid: &[f64],
    iterations: usize,
    master_seed: u64,
    workers: usize,
) -> Result<ConditionalRate> {
    cfg.validate()?;
    if grid.is_empty() || grid.iter().any(|&x| x > cfg.t || x.is_nan()) {
        return Err(Error::InvalidConfig(
            "q-value grid must be non-empty with points <= t".into(),
        ));
    }
    let sampler = MixtureSampler::new(cfg.pi0, cfg.delta, cfg.rho)?;
    let n = cfg.n;
    let per_iter = parallel_map(iterations, workers, |i| {
        let mut rng = Seed::new(master_seed, i as u64).rng();
        let (mut h, mut means, mut x) = (vec![false; n], vec![0.0; n], vec![0.0; n]);
        sampler.fill(&mut rng, &mut h, &mut means, &mut x);
        let null_mask: Vec<bool> = h.iter().map(|&alt| !alt).collect();
        grid.iter()
            .map(|&g| OutcomeTable::from_threshold(&x, g, &null_mask))
            .collect::<Vec<_>>()
    });
    let mut best: Option<ConditionalRate> = None;
    for g in 0..grid.len() {
        let values: Vec<f64> = per_iter
            .iter()
            .map(|row| row[g])
            .filter(|t| t.r() > 0)
            .map(|t| fdp(&t))
            .collect();
        if let Some(rate) = ConditionalRate::from_values(&values) {
            if best.is_none_or(|b| rate.estimate < b.estimate) {
                best = Some(rate);
            }
        }
    }
    best.ok_or(Error::UndefinedConditionalRate("R > 0"))
}

fn require_independence(cfg: &MixtureConfig) -> Result<()> {
    if cfg.rho != 0.0 {
        return Err(Error::DependenceNotSupported(cfg.rho));
    }
    Ok(())
}

/// `sum_i delta_i P{H_i = 0 | X_i >= t}`, exact under independence, where
/// `delta_i` are the FDR contributions of the marginal mixture law.
pub fn pfdr_closed_form(cfg: &MixtureConfig) -> Result<f64> {
    require_independence(cfg)?;
    let posterior = posterior_null_given_exceed(cfg)?;
    let exceed = vec![cfg.marginal_exceedance(); cfg.n];
    let rates = exact_rates_from_probs(&exceed, &vec![true; cfg.n])?;
    Ok(rates.delta_terms.iter().map(|d| d * posterior).sum())
}

/// `sum_i gamma_i P{H_i = 1 | X_i < t}`, exact under independence.
pub fn pfnr_closed_form(cfg: &MixtureConfig) -> Result<f64> {
    require_independence(cfg)?;
    let posterior = posterior_alt_given_accept(cfg)?;
    let exceed = vec![cfg.marginal_exceedance(); cfg.n];
    let rates = exact_rates_from_probs(&exceed, &vec![false; cfg.n])?;
    Ok(rates.gamma_terms.iter().map(|g| g * posterior).sum())
}

/// `P{R > 0}` under the i.i.d. mixture: `1 - (1 - p)^n`.
pub fn iid_prob_any_rejection(cfg: &MixtureConfig) -> f64 {
    -(cfg.n as f64 * (-cfg.marginal_exceedance()).ln_1p()).exp_m1()
}

/// `P{A > 0}` under the i.i.d. mixture: `1 - p^n`.
pub fn iid_prob_any_acceptance(cfg: &MixtureConfig) -> f64 {
    let pi0 = cfg.pi0.value();
    let below = pi0 * location_below(cfg.t, 0.0) + (1.0 - pi0) * location_below(cfg.t, cfg.delta);
    -(cfg.n as f64 * (-below).ln_1p()).exp_m1()
}
