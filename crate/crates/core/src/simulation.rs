//! Monte-Carlo experiment engine.
//!
//! Each iteration draws one equicorrelated vector and runs every configured
//! procedure on it (common random numbers). Iteration `i` of a scenario uses
//! stream `i` of the scenario's master seed, iterations are mapped in
//! parallel, and the merge happens sequentially in iteration order, so
//! results do not depend on the worker count.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    fdp, fnp, outcome_table, prob_max_at_least, prob_min_below, two_step_fdr_bound, two_step_fnr_bound, OutcomeTable,
};
use crate::procedure::{
    apply_two_step, sidak_fdr_threshold, CompiledProcedure, ErrorSide, ProcedureKind, ProcedureSpec, ReferenceCdf,
};
use crate::sampler::{mix_seed, EquicorrelatedSampler, Seed, TruthAssignment};

pub const DEFAULT_ITERATIONS: usize = 5000;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 0.05;
pub const DEFAULT_TAU_QUANTILE: f64 = 0.5;

/// CSV header of every result grid.
pub const CSV_HEADER: &str = "scenario_id,n,n0,delta,rho,procedure,metric,mean,se,iterations,seed";

/// Maps `f` over `0..count`, preserving index order. `workers == 0` uses the
/// global rayon pool, `1` runs inline.
pub(crate) fn parallel_map<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match workers {
        1 => (0..count).map(f).collect(),
        0 => (0..count).into_par_iter().map(f).collect(),
        w => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
            Err(_) => (0..count).map(f).collect(),
        },
    }
}

/// Sample mean and `sd / sqrt(len)` (sd with the `len - 1` divisor).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let len = values.len();
    if len == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / len as f64;
    if len == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (len - 1) as f64).sqrt() / (len as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Fdr,
    Fnr,
    /// `1 - FDR - FNR`.
    Power,
    /// `E(S) / n1`, auxiliary.
    AveragePower,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fdr => "FDR",
            Self::Fnr => "FNR",
            Self::Power => "POWER",
            Self::AveragePower => "AVG_POWER",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Fdr, Self::Fnr, Self::Power, Self::AveragePower]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric '{s}'")))
    }
}

/// One simulated scenario: a fixed truth assignment, a correlation, and a
/// battery of procedures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub n0: usize,
    pub delta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau_quantile: f64,
    pub iterations: usize,
    pub master_seed: u64,
    pub procedures: Vec<ProcedureSpec>,
}

impl ExperimentConfig {
    /// Scenario with the four FDR procedures at the defaults.
    pub fn fdr_cell(n: usize, n0: usize, delta: f64, rho: f64, master_seed: u64) -> Result<Self> {
        let mut cfg = Self {
            n,
            n0,
            delta,
            rho,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            tau_quantile: DEFAULT_TAU_QUANTILE,
            iterations: DEFAULT_ITERATIONS,
            master_seed,
            procedures: Vec::new(),
        };
        cfg.procedures = cfg.procedures_for(&ProcedureKind::FDR, ReferenceCdf::F0)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Specs for `kinds` at this config's levels, `n` and `tau_quantile`.
    pub fn procedures_for(&self, kinds: &[ProcedureKind], reference: ReferenceCdf) -> Result<Vec<ProcedureSpec>> {
        kinds
            .iter()
            .map(|&kind| {
                let level = match kind.side() {
                    ErrorSide::Fdr => self.alpha,
                    ErrorSide::Fnr => self.beta,
                };
                ProcedureSpec::new(kind, level, self.n, self.tau_quantile, reference)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n: must be at least 1".into()));
        }
        if self.n0 == 0 || self.n0 > self.n {
            return Err(Error::InvalidConfig(format!(
                "n0: need 1 <= n0 <= n, got n0 = {}, n = {}",
                self.n0, self.n
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta: must be positive, got {}",
                self.delta
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho: must lie in [0, 1), got {}",
                self.rho
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("tau_quantile", self.tau_quantile),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name}: must lie in (0, 1), got {v}")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations: must be at least 1".into()));
        }
        for p in &self.procedures {
            if p.n != self.n {
                return Err(Error::InvalidConfig(format!(
                    "procedures: {} compiled for n = {} but scenario has n = {}",
                    p.label(),
                    p.n,
                    self.n
                )));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<TruthAssignment> {
        TruthAssignment::last_alternatives(self.n, self.n0, self.delta)
    }
}

/// What one procedure did on one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureOutcome {
    pub table: OutcomeTable,
    pub threshold: f64,
}

/// Runs every iteration of `cfg` and returns per-iteration, per-procedure
/// outcomes in iteration order.
pub fn run_iterations(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<Vec<ProcedureOutcome>>> {
    cfg.validate()?;
    run_iterations_for(
        &cfg.truth()?,
        cfg.rho,
        &cfg.procedures,
        cfg.iterations,
        cfg.master_seed,
        workers,
    )
}

/// Like [`run_iterations`] for an arbitrary truth assignment, e.g. one where
/// some false nulls sit at the null mean.
pub fn run_iterations_for(
    truth: &TruthAssignment,
    rho: f64,
    procedures: &[ProcedureSpec],
    iterations: usize,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<Vec<ProcedureOutcome>>> {
    let n = truth.n();
    if let Some(p) = procedures.iter().find(|p| p.n != n) {
        return Err(Error::InvalidConfig(format!(
            "procedures: {} compiled for n = {} but the truth assignment has n = {n}",
            p.label(),
            p.n
        )));
    }
    let compiled = procedures
        .iter()
        .map(ProcedureSpec::compile)
        .collect::<Result<Vec<CompiledProcedure>>>()?;
    let sampler = EquicorrelatedSampler::new(rho)?;
    let (means, mask) = (truth.shifts(), truth.null_mask());
    Ok(parallel_map(iterations, workers, |i| {
        let mut x = vec![0.0; n];
        sampler.fill(&mut Seed::new(master_seed, i as u64).rng(), means, &mut x);
        compiled
            .iter()
            .map(|proc| {
                let (threshold, _) = proc.threshold_for(&x);
                ProcedureOutcome {
                    table: OutcomeTable::from_threshold(&x, threshold, mask),
                    threshold,
                }
            })
            .collect()
    }))
}

/// Mean and standard error of `metric` for procedure `p` over `outcomes`.
pub fn summarize(outcomes: &[Vec<ProcedureOutcome>], p: usize, metric: Metric) -> (f64, f64) {
    let values: Vec<f64> = outcomes
        .iter()
        .map(|row| {
            let t = &row[p].table;
            match metric {
                Metric::Fdr => fdp(t),
                Metric::Fnr => fnp(t),
                Metric::Power => 1.0 - fdp(t) - fnp(t),
                Metric::AveragePower => match t.n1() {
                    0 => 0.0,
                    n1 => t.s as f64 / n1 as f64,
                },
            }
        })
        .collect();
    mean_and_se(&values)
}

/// A simulated rate with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub procedure: ProcedureSpec,
    pub metric: Metric,
    pub mean: f64,
    pub standard_error: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub scenario_id: String,
    pub n: usize,
    pub n0: usize,
    pub delta: f64,
    pub rho: f64,
    /// Master seed supplied by the caller (scenario seeds are derived from it).
    pub seed: u64,
    pub estimate: CellEstimate,
}

/// Largest standard error within one column (rho, procedure, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxSeRow {
    pub n: usize,
    pub rho: f64,
    pub procedure: String,
    pub metric: Metric,
    pub max_se: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultGrid {
    pub rows: Vec<GridRow>,
    pub max_se: Vec<MaxSeRow>,
}

impl ResultGrid {
    pub fn find(&self, n0: usize, delta: f64, rho: f64, procedure: &str, metric: Metric) -> Option<&CellEstimate> {
        self.rows
            .iter()
            .find(|r| {
                r.n0 == n0
                    && r.delta == delta
                    && r.rho == rho
                    && r.estimate.metric == metric
                    && r.estimate.procedure.label() == procedure
            })
            .map(|r| &r.estimate)
    }

    /// Fills `max_se` with one row per (rho, procedure, metric) column, in
    /// order of first appearance.
    pub fn compute_max_se(&mut self) {
        let mut footer: Vec<MaxSeRow> = Vec::new();
        for row in &self.rows {
            let label = row.estimate.procedure.label();
            let se = row.estimate.standard_error;
            match footer
                .iter_mut()
                .find(|f| f.rho == row.rho && f.procedure == label && f.metric == row.estimate.metric)
            {
                Some(f) => f.max_se = f.max_se.max(se),
                None => footer.push(MaxSeRow {
                    n: row.n,
                    rho: row.rho,
                    procedure: label,
                    metric: row.estimate.metric,
                    max_se: se,
                    iterations: row.estimate.iterations,
                    seed: row.seed,
                }),
            }
        }
        self.max_se = footer;
    }

    /// Flat rows in CSV column order: data rows, then one `maxse` footer row
    /// per column with `n0`, `delta` and `mean` empty and the maximum SE in `se`.
    pub fn records(&self) -> Vec<CsvRecord> {
        let data = self.rows.iter().map(|r| CsvRecord {
            scenario_id: r.scenario_id.clone(),
            n: r.n,
            n0: Some(r.n0),
            delta: Some(r.delta),
            rho: r.rho,
            procedure: r.estimate.procedure.label(),
            metric: r.estimate.metric.name().to_string(),
            mean: Some(r.estimate.mean),
            se: r.estimate.standard_error,
            iterations: r.estimate.iterations,
            seed: r.seed,
        });
        let footer = self.max_se.iter().map(|f| CsvRecord {
            scenario_id: "maxse".to_string(),
            n: f.n,
            n0: None,
            delta: None,
            rho: f.rho,
            procedure: f.procedure.clone(),
            metric: f.metric.name().to_string(),
            mean: None,
            se: f.max_se,
            iterations: f.iterations,
            seed: f.seed,
        });
        data.chain(footer).collect()
    }

    pub fn to_csv(&self) -> String {
        let records = self.records();
        let mut out = String::with_capacity(96 * (records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &records {
            r.write_csv_line(&mut out);
        }
        out
    }
}

/// One line of the result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub scenario_id: String,
    pub n: usize,
    pub n0: Option<usize>,
    pub delta: Option<f64>,
    pub rho: f64,
    pub procedure: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub se: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl CsvRecord {
    fn write_csv_line(&self, out: &mut String) {
        let opt = |v: Option<f64>| v.map(format_g6).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            self.n,
            self.n0.map(|v| v.to_string()).unwrap_or_default(),
            opt(self.delta),
            format_g6(self.rho),
            self.procedure,
            self.metric,
            opt(self.mean),
            format_g6(self.se),
            self.iterations,
            self.seed
        );
    }
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn scenario_id(n0: usize, delta: f64, rho: f64) -> String {
    format!("n0-{}_delta-{}_rho-{}", n0, format_g6(delta), format_g6(rho))
}

/// Runs one scenario and reports each procedure under each of `metrics`.
pub fn run_experiment_metrics(
    cfg: &ExperimentConfig,
    metrics: &[Metric],
    workers: usize,
    reported_seed: u64,
) -> Result<ResultGrid> {
    let outcomes = run_iterations(cfg, workers)?;
    let id = scenario_id(cfg.n0, cfg.delta, cfg.rho);
    let n1 = cfg.n - cfg.n0;
    let mut grid = ResultGrid::default();
    for (p, spec) in cfg.procedures.iter().enumerate() {
        for &metric in metrics {
            if metric == Metric::AveragePower && n1 == 0 {
                continue;
            }
            let (mean, se) = summarize(&outcomes, p, metric);
            grid.rows.push(GridRow {
                scenario_id: id.clone(),
                n: cfg.n,
                n0: cfg.n0,
                delta: cfg.delta,
                rho: cfg.rho,
                seed: reported_seed,
                estimate: CellEstimate {
                    procedure: *spec,
                    metric,
                    mean,
                    standard_error: se,
                    iterations: cfg.iterations,
                },
            });
        }
    }
    Ok(grid)
}

/// Runs one scenario and reports FDR, FNR and power for every procedure.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ResultGrid> {
    let mut grid = run_experiment_metrics(
        cfg,
        &[Metric::Fdr, Metric::Fnr, Metric::Power],
        workers,
        cfg.master_seed,
    )?;
    grid.compute_max_se();
    Ok(grid)
}

/// A full factorial design over `n0 x delta x rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialDesign {
    pub n: usize,
    pub n0s: Vec<usize>,
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub tau_quantile: f64,
    pub iterations: usize,
}

impl Default for FactorialDesign {
    /// The 4 x 3 x 2 design with `n = 100`, `alpha = 0.05`, `F0(tau) = 1/2`
    /// and 5000 iterations.
    fn default() -> Self {
        Self {
            n: 100,
            n0s: vec![30, 50, 70, 90],
            deltas: vec![0.5, 1.5, 2.5],
            rhos: vec![0.0, 0.5],
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            tau_quantile: DEFAULT_TAU_QUANTILE,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

impl FactorialDesign {
    /// Scenarios in `rho`-major, then `n0`, then `delta` order, each with its
    /// derived seed.
    pub fn scenarios(&self, master_seed: u64) -> Vec<(usize, f64, f64, u64)> {
        let mut out = Vec::new();
        for &rho in &self.rhos {
            for &n0 in &self.n0s {
                for &delta in &self.deltas {
                    let index = out.len() as u64;
                    out.push((n0, delta, rho, mix_seed(master_seed, index)));
                }
            }
        }
        out
    }

    fn config(&self, n0: usize, delta: f64, rho: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            n0,
            delta,
            rho,
            alpha: self.alpha,
            beta: self.beta,
            tau_quantile: self.tau_quantile,
            iterations: self.iterations,
            master_seed: seed,
            procedures: Vec::new(),
        }
    }

    /// Runs every scenario with procedures produced by `procedures(cfg)`.
    pub fn run(
        &self,
        master_seed: u64,
        metrics: &[Metric],
        workers: usize,
        procedures: impl Fn(&ExperimentConfig) -> Result<Vec<ProcedureSpec>>,
    ) -> Result<ResultGrid> {
        let mut grid = ResultGrid::default();
        for (n0, delta, rho, seed) in self.scenarios(master_seed) {
            let mut cfg = self.config(n0, delta, rho, seed);
            cfg.procedures = procedures(&cfg)?;
            let cell = run_experiment_metrics(&cfg, metrics, workers, master_seed)?;
            grid.rows.extend(cell.rows);
        }
        grid.compute_max_se();
        Ok(grid)
    }
}

/// Simulated FDR of the four FDR procedures over the default design:
/// 96 cells plus one MaxSE row per (rho, procedure) column.
pub fn table2_suite(master_seed: u64, design: &FactorialDesign, workers: usize) -> Result<ResultGrid> {
    design.run(master_seed, &[Metric::Fdr], workers, |cfg| {
        cfg.procedures_for(&ProcedureKind::FDR, ReferenceCdf::F0)
    })
}

/// Simulated power `1 - FDR - FNR` of the four FDR procedures.
pub fn figure1_suite(master_seed: u64, design: &FactorialDesign, workers: usize) -> Result<ResultGrid> {
    design.run(master_seed, &[Metric::Power], workers, |cfg| {
        cfg.procedures_for(&ProcedureKind::FDR, ReferenceCdf::F0)
    })
}

/// Simulated FNR of the four FNR procedures, calibrated against `F0` and
/// against `F1` at the scenario's own `delta`.
pub fn fnr_suite(master_seed: u64, design: &FactorialDesign, workers: usize) -> Result<ResultGrid> {
    design.run(master_seed, &[Metric::Fnr], workers, |cfg| {
        let mut procs = cfg.procedures_for(&ProcedureKind::FNR, ReferenceCdf::F0)?;
        procs.extend(cfg.procedures_for(&ProcedureKind::FNR, ReferenceCdf::F1 { delta: cfg.delta })?);
        Ok(procs)
    })
}

/// Inputs for [`bound_check_suite`]; always independent (`rho = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckConfig {
    pub n: usize,
    pub n0: usize,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau_quantile: f64,
    pub iterations: usize,
    pub master_seed: u64,
}

impl BoundCheckConfig {
    pub fn new(n: usize, n0: usize, delta: f64, iterations: usize, master_seed: u64) -> Self {
        Self {
            n,
            n0,
            delta,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            tau_quantile: DEFAULT_TAU_QUANTILE,
            iterations,
            master_seed,
        }
    }
}

/// Simulated two-step rate against its exact upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub procedure: String,
    pub metric: Metric,
    pub simulated: f64,
    pub standard_error: f64,
    /// Exact two-step bound under independence.
    pub bound: f64,
    /// `level * P{X_(1) < tau}` (FDR) or `level * P{X_(n) >= tau}` (FNR).
    pub chain_bound: f64,
    pub level: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    /// With `tau = -inf` the two-step Sidak rule and the single-step Sidak rule
    /// produced bit-identical FDP sequences.
    pub degenerate_identical: bool,
}

impl BoundReport {
    pub fn all_within(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound)
    }
}

/// Checks simulated two-step FDR/FNR against the exact bounds (plus 3 SE).
pub fn bound_check_suite(cfg: &BoundCheckConfig, workers: usize) -> Result<BoundReport> {
    let mut exp = ExperimentConfig {
        n: cfg.n,
        n0: cfg.n0,
        delta: cfg.delta,
        rho: 0.0,
        alpha: cfg.alpha,
        beta: cfg.beta,
        tau_quantile: cfg.tau_quantile,
        iterations: cfg.iterations,
        master_seed: cfg.master_seed,
        procedures: Vec::new(),
    };
    let f1 = ReferenceCdf::F1 { delta: cfg.delta };
    let fdr_kinds = [ProcedureKind::ModifiedBonferroniFdr, ProcedureKind::ModifiedSidakFdr];
    let fnr_kinds = [ProcedureKind::ModifiedBonferroniFnr, ProcedureKind::ModifiedSidakFnr];
    let mut procs = exp.procedures_for(&fdr_kinds, ReferenceCdf::F0)?;
    procs.extend(exp.procedures_for(&fnr_kinds, ReferenceCdf::F0)?);
    procs.extend(exp.procedures_for(&fnr_kinds, f1)?);
    exp.procedures = procs;
    let truth = exp.truth()?;
    let outcomes = run_iterations(&exp, workers)?;

    let mut rows = Vec::new();
    for (p, spec) in exp.procedures.iter().enumerate() {
        let tau = spec.tau();
        let (level, reference) = (spec.level, spec.reference);
        let CompiledProcedure::TwoStep(table) = spec.compile()? else {
            continue;
        };
        let t = |k: usize| table.get(k);
        let (metric, bound, chain) = match spec.kind.side() {
            ErrorSide::Fdr => (
                Metric::Fdr,
                two_step_fdr_bound(t, tau, &truth)?,
                level * prob_min_below(tau, &truth),
            ),
            ErrorSide::Fnr => (
                Metric::Fnr,
                two_step_fnr_bound(t, tau, &truth, reference)?,
                level * prob_max_at_least(tau, &truth),
            ),
        };
        let (simulated, se) = summarize(&outcomes, p, metric);
        rows.push(BoundRow {
            procedure: spec.label(),
            metric,
            simulated,
            standard_error: se,
            bound,
            chain_bound: chain,
            level,
            within_bound: simulated <= bound + 3.0 * se,
        });
    }

    let degenerate_identical = degenerate_two_step_matches(&exp, &truth, workers)?;
    Ok(BoundReport {
        rows,
        degenerate_identical,
    })
}

/// Runs the Sidak FDR rule as a single-step procedure and as a two-step
/// procedure with `tau = -inf` on the same draws and compares FDPs bitwise.
fn degenerate_two_step_matches(exp: &ExperimentConfig, truth: &TruthAssignment, workers: usize) -> Result<bool> {
    let t = sidak_fdr_threshold(exp.alpha, exp.n)?;
    let sampler = EquicorrelatedSampler::new(exp.rho)?;
    let pairs = parallel_map(exp.iterations, workers, |i| -> Result<(u64, u64)> {
        let mut x = vec![0.0; exp.n];
        sampler.fill(&mut Seed::new(exp.master_seed, i as u64).rng(), truth.shifts(), &mut x);
        let single = OutcomeTable::from_threshold(&x, t, truth.null_mask());
        let two = apply_two_step(
            &x,
            f64::NEG_INFINITY,
            |k| if k == 0 { t } else { f64::INFINITY },
            ErrorSide::Fdr,
        )?;
        let two = outcome_table(&two.rejected, truth)?;
        Ok((fdp(&single).to_bits(), fdp(&two).to_bits()))
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pairs.iter().all(|(a, b)| a == b))
}
