mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fdrstep_core::metrics::{exact_error_rates, sup_fdr_single_step, sup_fnr_single_step};
use fdrstep_core::mixture::{
    pfdr_closed_form, pfnr_closed_form, posterior_alt_given_accept, posterior_null_given_exceed, q_value,
    simulate_mixture,
};
use fdrstep_core::simulation::{
    bound_check_suite, figure1_suite, fnr_suite, format_g6, run_experiment_metrics, table2_suite, BoundCheckConfig,
    FactorialDesign, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_ITERATIONS, DEFAULT_TAU_QUANTILE,
};
use fdrstep_core::{
    CompiledProcedure, ErrorSide, MixtureConfig, ProcedureKind, ProcedureSpec, ReferenceCdf, ResultGrid,
    TruthAssignment,
};
use serde::Serialize;

use config::{ConfigError, ReferenceKind};

const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Bonferroni- and Sidak-type FDR/FNR procedures: thresholds, exact error
/// rates and Monte-Carlo studies.
#[derive(Debug, Parser)]
#[command(name = "fdrstep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the critical value(s) of a procedure.
    Threshold(ThresholdArgs),
    /// Exact FDR and FNR of a single-step rule under independence.
    Exact(ExactArgs),
    /// Simulate one scenario described by a TOML file.
    Simulate(SimulateArgs),
    /// Simulated FDR of the four FDR procedures over the standard design.
    Table2(SuiteArgs),
    /// Simulated power (1 - FDR - FNR) of the four FDR procedures.
    Figure1(SuiteArgs),
    /// Simulated FNR of the four FNR procedures, F0- and F1-calibrated.
    FnrSuite(SuiteArgs),
    /// Simulated two-step rates against their exact bounds (independence).
    Bounds(BoundsArgs),
    /// Posterior error rates and q-value in the two-point mixture model.
    Mixture(MixtureArgs),
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Master seed (required: runs are never implicitly random).
    #[arg(long)]
    seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct ReferenceArgs {
    /// Calibration distribution for FNR procedures.
    #[arg(long, value_enum, default_value_t = ReferenceKind::F0)]
    reference: ReferenceKind,
    /// Shift of F1 when `--reference f1`.
    #[arg(long = "reference-delta")]
    reference_delta: Option<f64>,
}

impl ReferenceArgs {
    fn resolve(&self) -> Result<ReferenceCdf> {
        Ok(self.reference.resolve(self.reference_delta).map_err(ConfigError)?)
    }
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long, value_parser = parse_kind)]
    procedure: ProcedureKind,
    /// FDR level (FDR procedures).
    #[arg(long)]
    alpha: Option<f64>,
    /// FNR level (FNR procedures).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: usize,
    /// F0(tau) for two-step procedures.
    #[arg(long, default_value_t = DEFAULT_TAU_QUANTILE)]
    tau_quantile: f64,
    #[command(flatten)]
    reference: ReferenceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    n0: usize,
    /// Mean of the false nulls.
    #[arg(long)]
    delta: f64,
    /// Explicit critical value; otherwise derived from `--procedure`.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "procedure")]
    threshold: Option<f64>,
    /// Single-step procedure whose critical value to use.
    #[arg(long, value_parser = parse_kind, required_unless_present = "threshold")]
    procedure: Option<ProcedureKind>,
    /// Level of `--procedure`.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    level: f64,
    #[command(flatten)]
    reference: ReferenceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the file; one of the two is required.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `iterations` in the file.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    n0: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_QUANTILE)]
    tau_quantile: f64,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct MixtureArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    pi0: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Critical value of the rule `X_i >= t`.
    #[arg(long, allow_negative_numbers = true)]
    t: f64,
    /// Monte-Carlo iterations; 0 reports the closed forms only.
    #[arg(long, default_value_t = 0)]
    iterations: usize,
    /// Required when `--iterations` is positive.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_kind(s: &str) -> Result<ProcedureKind, String> {
    s.parse().map_err(|e: fdrstep_core::Error| e.to_string())
}

/// A failure caused by the caller's input rather than by the computation.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn is_usage_error(err: &anyhow::Error) -> bool {
    use fdrstep_core::Error as E;
    err.chain().any(|cause| {
        cause.is::<Usage>()
            || cause.is::<ConfigError>()
            || matches!(
                cause.downcast_ref::<E>(),
                Some(
                    E::OutOfRange { .. }
                        | E::InvalidCount(_)
                        | E::IndexOutOfRange { .. }
                        | E::DependenceNotSupported(_)
                        | E::InvalidConfig(_)
                )
            )
    })
}

fn emit(output: &OutputArgs, csv: String, json: impl Serialize) -> Result<()> {
    let body = match output.format {
        Format::Csv => csv,
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
    };
    match &output.out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().lock().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_grid(output: &OutputArgs, grid: &ResultGrid) -> Result<()> {
    emit(output, grid.to_csv(), grid.records())
}

/// Level attained by a critical value on its own scale: `1 - F0(t)` for FDR
/// rules, `F_ref(t)` for FNR rules.
fn attained_level(side: ErrorSide, reference: ReferenceCdf, t: f64) -> f64 {
    match side {
        ErrorSide::Fdr => ReferenceCdf::F0.sf(t),
        ErrorSide::Fnr => reference.cdf(t),
    }
}

#[derive(Serialize)]
struct ThresholdRow {
    procedure: String,
    n: usize,
    k: Option<usize>,
    threshold: f64,
    level: f64,
}

fn cmd_threshold(a: &ThresholdArgs) -> Result<()> {
    let side = a.procedure.side();
    let level = match side {
        ErrorSide::Fdr => a.alpha,
        ErrorSide::Fnr => a.beta,
    };
    let Some(level) = level else {
        let flag = if side == ErrorSide::Fdr { "--alpha" } else { "--beta" };
        return Err(usage(format!("{flag} is required for {}", a.procedure)));
    };
    let reference = a.reference.resolve()?;
    let spec = ProcedureSpec::new(a.procedure, level, a.n, a.tau_quantile, reference)?;
    let rows: Vec<ThresholdRow> = match spec.compile()? {
        CompiledProcedure::SingleStep { threshold } => vec![ThresholdRow {
            procedure: spec.label(),
            n: a.n,
            k: None,
            threshold,
            level: attained_level(side, reference, threshold),
        }],
        CompiledProcedure::TwoStep(table) => table
            .values()
            .iter()
            .enumerate()
            .map(|(k, &t)| ThresholdRow {
                procedure: spec.label(),
                n: a.n,
                k: Some(k),
                threshold: t,
                level: attained_level(side, reference, t),
            })
            .collect(),
    };
    let mut csv = String::from("procedure,n,k,threshold,level\n");
    for r in &rows {
        csv += &format!(
            "{},{},{},{},{}\n",
            r.procedure,
            r.n,
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.threshold,
            r.level
        );
    }
    emit(&a.output, csv, rows)
}

#[derive(Serialize)]
struct ExactRow {
    n: usize,
    n0: usize,
    delta: f64,
    threshold: f64,
    fdr: f64,
    fnr: f64,
    p_any_rejection: f64,
    p_any_acceptance: f64,
    sup_fdr: f64,
    sup_fnr: f64,
}

fn cmd_exact(a: &ExactArgs) -> Result<()> {
    let reference = a.reference.resolve()?;
    let threshold = match (a.threshold, a.procedure) {
        (Some(t), _) => t,
        (None, Some(kind)) => {
            if kind.is_two_step() {
                return Err(usage(format!(
                    "{kind} is a two-step procedure; use `bounds` for its exact bound"
                )));
            }
            match ProcedureSpec::new(kind, a.level, a.n, DEFAULT_TAU_QUANTILE, reference)?.compile()? {
                CompiledProcedure::SingleStep { threshold } => threshold,
                CompiledProcedure::TwoStep(_) => unreachable!("two-step kinds rejected above"),
            }
        }
        (None, None) => return Err(usage("one of --threshold or --procedure is required")),
    };
    if a.n0 > a.n {
        return Err(usage(format!("--n0 = {} exceeds --n = {}", a.n0, a.n)));
    }
    let truth = TruthAssignment::last_alternatives(a.n, a.n0, a.delta)?;
    let rates = exact_error_rates(threshold, &truth)?;
    let row = ExactRow {
        n: a.n,
        n0: a.n0,
        delta: a.delta,
        threshold,
        fdr: rates.fdr,
        fnr: rates.fnr,
        p_any_rejection: rates.p_any_rejection,
        p_any_acceptance: rates.p_any_acceptance,
        sup_fdr: sup_fdr_single_step(a.n0, a.n, threshold)?,
        sup_fnr: sup_fnr_single_step(a.n - a.n0, a.n, threshold, reference)?,
    };
    let csv = format!(
        "n,n0,delta,threshold,fdr,fnr,p_any_rejection,p_any_acceptance,sup_fdr,sup_fnr\n{},{},{},{},{},{},{},{},{},{}\n",
        row.n,
        row.n0,
        row.delta,
        row.threshold,
        row.fdr,
        row.fnr,
        row.p_any_rejection,
        row.p_any_acceptance,
        row.sup_fdr,
        row.sup_fnr
    );
    emit(&a.output, csv, row)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let file = config::load_experiment(&a.config)?;
    let Some(seed) = a.seed.or(file.seed) else {
        return Err(usage("seed: required, pass --seed or set `seed` in the config file"));
    };
    let (mut cfg, metrics) = file.to_experiment(seed)?;
    if let Some(iterations) = a.iterations {
        cfg.iterations = iterations;
        cfg.validate()?;
    }
    let mut grid = run_experiment_metrics(&cfg, &metrics, a.workers, seed)?;
    grid.compute_max_se();
    emit_grid(&a.output, &grid)
}

fn design(iterations: usize) -> FactorialDesign {
    FactorialDesign {
        iterations,
        ..FactorialDesign::default()
    }
}

fn check_iterations(iterations: usize) -> Result<()> {
    if iterations == 0 {
        return Err(usage("--iterations must be at least 1"));
    }
    Ok(())
}

fn cmd_suite(a: &SuiteArgs, run: fn(u64, &FactorialDesign, usize) -> fdrstep_core::Result<ResultGrid>) -> Result<()> {
    check_iterations(a.iterations)?;
    let grid = run(a.run.seed, &design(a.iterations), a.run.workers)?;
    emit_grid(&a.output, &grid)
}

fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    check_iterations(a.iterations)?;
    let cfg = BoundCheckConfig {
        n: a.n,
        n0: a.n0,
        delta: a.delta,
        alpha: a.alpha,
        beta: a.beta,
        tau_quantile: a.tau_quantile,
        iterations: a.iterations,
        master_seed: a.run.seed,
    };
    let report = bound_check_suite(&cfg, a.run.workers)?;
    let mut csv = String::from("procedure,metric,simulated,se,bound,chain_bound,level,within_bound,iterations,seed\n");
    for r in &report.rows {
        csv += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.procedure,
            r.metric,
            format_g6(r.simulated),
            format_g6(r.standard_error),
            format_g6(r.bound),
            format_g6(r.chain_bound),
            format_g6(r.level),
            r.within_bound,
            a.iterations,
            a.run.seed
        );
    }
    if !report.degenerate_identical {
        bail!("two-step rule with tau = -inf diverged from the single-step rule");
    }
    emit(&a.output, csv, &report)
}

#[derive(Serialize)]
struct MixtureRow {
    quantity: &'static str,
    value: f64,
    se: Option<f64>,
}

fn cmd_mixture(a: &MixtureArgs) -> Result<()> {
    let cfg = MixtureConfig::new(a.n, a.pi0, a.delta, a.rho, a.t)?;
    let mut rows = vec![
        MixtureRow {
            quantity: "posterior_null_given_exceed",
            value: posterior_null_given_exceed(&cfg)?,
            se: None,
        },
        MixtureRow {
            quantity: "posterior_alt_given_accept",
            value: posterior_alt_given_accept(&cfg)?,
            se: None,
        },
        MixtureRow {
            quantity: "q_value",
            value: q_value(&cfg)?,
            se: None,
        },
    ];
    if a.rho == 0.0 {
        rows.push(MixtureRow {
            quantity: "fdr_rhs",
            value: pfdr_closed_form(&cfg)?,
            se: None,
        });
        rows.push(MixtureRow {
            quantity: "fnr_rhs",
            value: pfnr_closed_form(&cfg)?,
            se: None,
        });
    }
    if a.iterations > 0 {
        let Some(seed) = a.seed else {
            return Err(usage("--seed is required when --iterations is positive"));
        };
        let sim = simulate_mixture(&cfg, a.iterations, seed, a.workers)?;
        rows.push(MixtureRow {
            quantity: "simulated_fdr",
            value: sim.fdr,
            se: Some(sim.fdr_se),
        });
        rows.push(MixtureRow {
            quantity: "simulated_fnr",
            value: sim.fnr,
            se: Some(sim.fnr_se),
        });
        if let Some(p) = sim.pfdr {
            rows.push(MixtureRow {
                quantity: "simulated_pfdr",
                value: p.estimate,
                se: Some(p.standard_error),
            });
        }
        if let Some(p) = sim.pfnr {
            rows.push(MixtureRow {
                quantity: "simulated_pfnr",
                value: p.estimate,
                se: Some(p.standard_error),
            });
        }
    }
    let seed = a
        .seed
        .filter(|_| a.iterations > 0)
        .map(|s| s.to_string())
        .unwrap_or_default();
    let mut csv = String::from("n,pi0,delta,rho,t,quantity,value,se,iterations,seed\n");
    for r in &rows {
        csv += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            a.n,
            format_g6(a.pi0),
            format_g6(a.delta),
            format_g6(a.rho),
            format_g6(a.t),
            r.quantity,
            r.value,
            r.se.map(|s| s.to_string()).unwrap_or_default(),
            a.iterations,
            seed
        );
    }
    emit(&a.output, csv, rows)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Threshold(a) => cmd_threshold(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Table2(a) => cmd_suite(a, table2_suite),
        Command::Figure1(a) => cmd_suite(a, figure1_suite),
        Command::FnrSuite(a) => cmd_suite(a, fnr_suite),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Mixture(a) => cmd_mixture(a),
    }
}

/// Collapses an error chain onto one line.
fn one_line(err: &anyhow::Error) -> String {
    format!("{err:#}").replace(['\n', '\r'], " ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let text: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("error: usage: {}", text.join(" ").trim_start_matches("error: "));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_usage_error(&err) => {
            eprintln!("error: usage: {}", one_line(&err));
            ExitCode::from(EXIT_USAGE)
        }
        Err(err) => {
            eprintln!("error: runtime: {}", one_line(&err));
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
