//! Subcommands of the `cosched` binary.
//!
//! Every command reads JSON documents, writes its results under `--out` and
//! prints a short summary on stdout. Logs go to stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use cosched_core::ddccg::{
    exhaustive_oracle, run, split_problem, without_ddu, CoSchedule, CornerMode, DdccgError, DdccgTrace, DduEntry,
    RunOptions, ZetaMode,
};
use cosched_core::ddu::YieldAmbiguity;
use cosched_core::factory::{
    load_factory, simulate_schedule, CostReport, Diagnostic, FactoryError, FactoryGraph, UncertaintyRealization,
};
use cosched_core::scenario::{
    engine_instance, fit_ddu_params, gen_synthetic, hourly_variance, monte_carlo_eval, FitSpec, FittedParams,
    HistoryBundle, McSummary, MomentPoint, Samplers, ScenarioError, SyntheticConfig,
};
use cosched_core::Parallelism;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_LIMITS: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Diagnostic>),
    #[error("run directory {0} has no report.json")]
    MissingRun(PathBuf),
    #[error("instance is infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Limits(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::MissingRun(_) => EXIT_VALIDATION,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Limits(_) => EXIT_LIMITS,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn invalid(check: &str, location: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation(vec![Diagnostic { check: check.into(), location: location.into(), message: message.into() }])
    }
}

impl From<FactoryError> for CliError {
    fn from(e: FactoryError) -> Self {
        match e {
            FactoryError::Schema { path, message } => CliError::invalid("schema", path, message),
            FactoryError::Consistency(d) => CliError::Validation(d),
            e @ FactoryError::InfeasibleSchedule { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<DdccgError> for CliError {
    fn from(e: DdccgError) -> Self {
        match e {
            DdccgError::Factory(f) => f.into(),
            DdccgError::Split(_) | DdccgError::Ddu(_) => CliError::invalid("plan", "entries", e.to_string()),
            DdccgError::InfeasibleInstance => CliError::Infeasible(e.to_string()),
            DdccgError::TooLargeForOracle { .. } | DdccgError::IterationLimitExceeded { .. } => {
                CliError::Limits(e.to_string())
            }
            DdccgError::Kernel(_) | DdccgError::OracleFailure(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Ddccg(d) => d.into(),
            e => CliError::invalid("history", "bundle", e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "cosched", version, about = "Robust co-scheduling of plant equipment and energy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance (and optionally its history and plan).
    Validate(ValidateArgs),
    /// Write a seeded synthetic case (or the engine case) to a directory.
    Gen(GenArgs),
    /// Fit the load box and line-state bands from history.
    Fit(FitArgs),
    /// Solve the robust schedule.
    Solve(SolveArgs),
    /// Replay a solved schedule against every load corner it was solved for.
    Simulate(SimulateArgs),
    /// Out-of-sample Monte Carlo evaluation of a solved schedule.
    Mc(McArgs),
    /// Brute-force min-max-min optimum of a small case.
    Oracle(OracleArgs),
    /// Comparison table over several run directories.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CornerArg {
    Exact,
    Greedy,
}

impl From<CornerArg> for CornerMode {
    fn from(c: CornerArg) -> Self {
        match c {
            CornerArg::Exact => CornerMode::Exact,
            CornerArg::Greedy => CornerMode::Greedy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentArg {
    Worst,
    Center,
}

/// Instance, history and plan paths plus the knobs that reshape the plan.
#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub history: PathBuf,
    /// Fit spec plus optional yield ambiguity (`plan.json` from `gen`).
    #[arg(long)]
    pub plan: PathBuf,
    /// IDM confidence; several comma-separated values run a sweep.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Accept unknown keys in the instance document.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Synthetic generator settings; defaults are used for missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the engine case over this many hours instead.
    #[arg(long)]
    pub engine: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Absolute gap at which the loop stops.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = CornerArg::Exact)]
    pub corners: CornerArg,
    /// Solve with the uncertainty switched off (nominal yields, zero-width
    /// load box, posterior-mean by-product weight).
    #[arg(long)]
    pub no_ddu: bool,
    /// Row label used by `report`; defaults to `ddu` or `no-ddu`.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// `schedule.json` written by `solve`.
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Point of the moment set the load law is drawn from.
    #[arg(long, value_enum, default_value_t = MomentArg::Worst)]
    pub moment: MomentArg,
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub no_ddu: bool,
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directories written by `solve` (and optionally `mc`).
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Yield ambiguity and fit settings that travel with an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub fit: FitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yields: Option<YieldAmbiguity>,
}

/// What `solve` leaves behind for `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub gamma: Option<f64>,
    pub objective: f64,
    pub gap: f64,
    pub lower_bound: f64,
    pub iterations: usize,
    /// Replay of the schedule under its worst load corner.
    pub worst_case: CostReport,
    /// Population variance of the hourly equipment energy.
    pub consumption_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub objective: f64,
    pub on: Vec<(usize, usize, usize)>,
    pub feasible_points: usize,
    pub recourse_feasible_points: usize,
    pub corners: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub power_cost: f64,
    pub main_products: f64,
    pub by_products: f64,
    pub objective: f64,
    /// `worst_case` or `monte_carlo`.
    pub source: String,
}

pub const REPORT_COLUMNS: [&str; 4] = ["Power Cost", "Main Products", "By-products", "Objective"];

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::invalid("path", path.display().to_string(), e.to_string()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        CliError::invalid("schema", format!("{}:{}", path.display(), e.path()), e.inner().to_string())
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

fn load_instance(path: &Path, lenient: bool) -> Result<FactoryGraph, CliError> {
    Ok(load_factory(&read_text(path)?, lenient)?)
}

fn check_range(name: &str, value: f64, ok: bool) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::invalid("flag", name, format!("{value} is out of range")))
    }
}

fn parallelism(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

/// A loaded case with the flag overrides applied to its fit spec.
pub struct Case {
    pub graph: FactoryGraph,
    pub history: HistoryBundle,
    pub plan: PlanFile,
}

impl Case {
    pub fn load(args: &CaseArgs) -> Result<Self, CliError> {
        let graph = load_instance(&args.instance, args.lenient)?;
        let history: HistoryBundle = read_json(&args.history)?;
        let mut plan: PlanFile = read_json(&args.plan)?;
        if history.horizon() != graph.horizon {
            return Err(CliError::invalid(
                "horizon",
                args.history.display().to_string(),
                format!("history covers {} hours, instance {}", history.horizon(), graph.horizon),
            ));
        }
        if let Some(g1) = args.gamma1 {
            check_range("--gamma1", g1, g1 >= 0.0)?;
            plan.fit.gamma1 = g1;
        }
        if let Some(g2) = args.gamma2 {
            check_range("--gamma2", g2, g2 >= 0.0)?;
            plan.fit.gamma2 = g2;
        }
        for &g in &args.gamma {
            check_range("--gamma", g, g > 0.0 && g < 1.0)?;
        }
        Ok(Case { graph, history, plan })
    }

    pub fn with_gamma(&self, gamma: Option<f64>) -> FitSpec {
        let mut fit = self.plan.fit.clone();
        if let Some(g) = gamma {
            fit.gamma = g;
        }
        fit
    }

    pub fn fit(&self, gamma: Option<f64>) -> Result<FittedParams, CliError> {
        Ok(fit_ddu_params(&self.history, &self.with_gamma(gamma))?)
    }

    pub fn entries(&self, gamma: Option<f64>) -> Result<Vec<DduEntry>, CliError> {
        Ok(self.fit(gamma)?.entries(self.plan.yields.as_ref()))
    }
}

/// `{"valid": .., "diagnostics": [..]}` on stdout; exit 2 when invalid.
pub fn cmd_validate(args: &ValidateArgs) -> Result<String, CliError> {
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut collect = |r: Result<(), CliError>| match r {
        Ok(()) => Ok(()),
        Err(CliError::Validation(d)) => {
            diagnostics.extend(d);
            Ok(())
        }
        Err(e) => Err(e),
    };
    let graph = match load_instance(&args.instance, args.lenient) {
        Ok(g) => Some(g),
        Err(e) => {
            collect(Err(e))?;
            None
        }
    };
    if let (Some(graph), Some(history), Some(plan)) = (&graph, &args.history, &args.plan) {
        let r = (|| {
            let history: HistoryBundle = read_json(history)?;
            let plan: PlanFile = read_json(plan)?;
            if history.horizon() != graph.horizon {
                return Err(CliError::invalid("horizon", "history", "history and instance horizons differ"));
            }
            if let Some(y) = &plan.yields {
                y.validate(&graph.option_counts())
                    .map_err(|e| CliError::invalid("yields", "plan", e.to_string()))?;
            }
            let fitted = fit_ddu_params(&history, &plan.fit)?;
            split_problem(graph, &fitted.entries(plan.yields.as_ref()))?;
            Ok(())
        })();
        collect(r)?;
    }
    if diagnostics.is_empty() {
        Ok(validation_json(&diagnostics))
    } else {
        Err(CliError::Validation(diagnostics))
    }
}

/// Machine-readable verdict printed by `validate` and on any validation
/// failure.
pub fn validation_json(diagnostics: &[Diagnostic]) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        valid: bool,
        diagnostics: &'a [Diagnostic],
    }
    pretty(&Out { valid: diagnostics.is_empty(), diagnostics })
}

pub fn cmd_gen(args: &GenArgs) -> Result<String, CliError> {
    let inst = if let Some(hours) = args.engine {
        check_range("--engine", hours as f64, (1..=24).contains(&hours))?;
        engine_instance(hours, hours.min(4), args.seed.unwrap_or(1))?
    } else {
        let mut cfg: SyntheticConfig = match &args.config {
            Some(p) => read_json(p)?,
            None => SyntheticConfig::default(),
        };
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        gen_synthetic(&cfg)?
    };
    write(&args.out, "instance.json", &pretty(&inst.graph))?;
    write(&args.out, "history.json", &pretty(&inst.history))?;
    write(&args.out, "plan.json", &pretty(&PlanFile { fit: inst.fit_spec.clone(), yields: inst.yields.clone() }))?;
    write(&args.out, "planted.json", &pretty(&inst.planted))?;
    Ok(format!("wrote case to {}\n", args.out.display()))
}

pub fn cmd_fit(args: &FitArgs) -> Result<String, CliError> {
    let history: HistoryBundle = read_json(&args.history)?;
    let plan: PlanFile = read_json(&args.plan)?;
    let mut fit = plan.fit;
    if let Some(g) = args.gamma {
        check_range("--gamma", g, g > 0.0 && g < 1.0)?;
        fit.gamma = g;
    }
    if let Some(g1) = args.gamma1 {
        check_range("--gamma1", g1, g1 >= 0.0)?;
        fit.gamma1 = g1;
    }
    if let Some(g2) = args.gamma2 {
        check_range("--gamma2", g2, g2 >= 0.0)?;
        fit.gamma2 = g2;
    }
    let fitted = fit_ddu_params(&history, &fit)?;
    write(&args.out, "params.json", &pretty(&fitted))?;
    Ok(format!("wrote {}\n", args.out.join("params.json").display()))
}

/// Worst-corner replay of a solved schedule.
pub fn worst_case_report(graph: &FactoryGraph, co: &CoSchedule) -> Result<CostReport, CliError> {
    let worst = co
        .worst_case
        .y_star
        .as_ref()
        .ok_or_else(|| CliError::Internal("solved schedule has no worst-case dispatch".into()))?;
    let mut schedule = co.schedule.clone();
    schedule.byproduct_sales = worst.byproduct_sales.clone();
    let real = UncertaintyRealization {
        yields: co.wx.alpha.clone(),
        expected_load: worst.expected_load.clone(),
        zeta: co.wx.zeta.clone(),
    };
    Ok(simulate_schedule(graph, &schedule, &worst.dispatch, &real)?)
}

/// Trace with wall-clock times zeroed, so reruns write identical bytes.
fn stable_trace(trace: &DdccgTrace) -> String {
    let mut t = trace.clone();
    for r in &mut t.records {
        r.elapsed_ms = 0.0;
    }
    t.to_jsonl()
}

fn solve_one(
    case: &Case,
    args: &SolveArgs,
    gamma: Option<f64>,
    out: &Path,
) -> Result<(RunReport, CoSchedule), CliError> {
    let mut entries = case.entries(gamma)?;
    let mut opts = RunOptions {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        corners: args.corners.into(),
        parallelism: parallelism(args.sequential),
        ..Default::default()
    };
    if args.no_ddu {
        entries = without_ddu(&entries);
        opts.zeta = ZetaMode::PosteriorMean;
    }
    let (co, trace) = match run(&case.graph, &entries, &opts) {
        Ok(r) => r,
        Err(DdccgError::IterationLimitExceeded { incumbent, trace }) => {
            write(out, "trace.jsonl", &stable_trace(&trace))?;
            if let Some(inc) = incumbent {
                write(out, "schedule.json", &pretty(&inc))?;
            }
            return Err(CliError::Limits(format!("iteration limit {} reached; incumbent kept", args.max_iters)));
        }
        Err(e) => return Err(e.into()),
    };
    info!("solved in {} iterations, objective {}", trace.iterations(), co.objective);
    let worst_case = worst_case_report(&case.graph, &co)?;
    let label = args.label.clone().unwrap_or_else(|| if args.no_ddu { "no-ddu".into() } else { "ddu".into() });
    let report = RunReport {
        label,
        gamma,
        objective: co.objective,
        gap: co.gap,
        lower_bound: co.lower_bound,
        iterations: trace.iterations(),
        consumption_variance: hourly_variance(&worst_case.hourly.energy),
        worst_case,
    };
    write(out, "schedule.json", &pretty(&co))?;
    write(out, "trace.jsonl", &stable_trace(&trace))?;
    write(out, "report.json", &pretty(&report))?;
    Ok((report, co))
}

fn gamma_dir(g: f64) -> String {
    format!("gamma-{g}")
}

/// One run, or one run per `--gamma` value in `gamma-<value>/` plus a
/// sweep table.
pub fn cmd_solve(args: &SolveArgs) -> Result<String, CliError> {
    check_range("--epsilon", args.epsilon, args.epsilon > 0.0)?;
    check_range("--max-iters", args.max_iters as f64, args.max_iters > 0)?;
    let case = Case::load(&args.case)?;
    let mut stdout = String::new();
    if args.case.gamma.len() <= 1 {
        let (rep, _) = solve_one(&case, args, args.case.gamma.first().copied(), &args.out)?;
        writeln!(stdout, "objective {} gap {}", rep.objective, rep.gap).unwrap();
        return Ok(stdout);
    }
    let mut rows = Vec::new();
    for &g in &args.case.gamma {
        let dir = args.out.join(gamma_dir(g));
        let (mut rep, _) = solve_one(&case, args, Some(g), &dir)?;
        writeln!(stdout, "gamma {g} objective {} gap {}", rep.objective, rep.gap).unwrap();
        rep.label = format!("gamma={g}");
        rows.push(row_from(&rep, None));
    }
    write(&args.out, "sweep.json", &pretty(&rows))?;
    write(&args.out, "sweep.txt", &render_table(&rows))?;
    Ok(stdout)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let graph = load_instance(&args.instance, args.lenient)?;
    let co: CoSchedule = read_json(&args.schedule)?;
    let mut reports = Vec::new();
    for s in &co.dispatch_policy {
        let mut schedule = co.schedule.clone();
        schedule.byproduct_sales = s.byproduct_sales.clone();
        let real = UncertaintyRealization {
            yields: co.wx.alpha.clone(),
            expected_load: s.expected_load.clone(),
            zeta: co.wx.zeta.clone(),
        };
        reports.push(simulate_schedule(&graph, &schedule, &s.dispatch, &real)?);
    }
    let worst = reports.iter().map(|r| r.objective).fold(f64::NEG_INFINITY, f64::max);
    write(&args.out, "simulation.json", &pretty(&reports))?;
    Ok(format!("{} scenarios replayed, worst objective {worst}\n", reports.len()))
}

pub fn cmd_mc(args: &McArgs) -> Result<String, CliError> {
    check_range("--n", args.n as f64, args.n > 0)?;
    let case = Case::load(&args.case)?;
    let co: CoSchedule = read_json(&args.schedule)?;
    let mut samplers = Samplers::from_entries(&case.entries(args.case.gamma.first().copied())?);
    samplers.moment = match args.moment {
        MomentArg::Worst => MomentPoint::Worst,
        MomentArg::Center => MomentPoint::Center,
    };
    let summary = monte_carlo_eval(&case.graph, &co.schedule, &samplers, args.n, args.seed, parallelism(args.sequential))?;
    write(&args.out, "mc.json", &summary.to_json())?;
    Ok(format!(
        "mean objective {} fr violation rate {} infeasible trials {}\n",
        summary.mean_objective, summary.fr_violation_rate, summary.infeasible_trials
    ))
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<String, CliError> {
    let case = Case::load(&args.case)?;
    let mut entries = case.entries(args.case.gamma.first().copied())?;
    let mut mode = ZetaMode::Adversarial;
    if args.no_ddu {
        entries = without_ddu(&entries);
        mode = ZetaMode::PosteriorMean;
    }
    let split = split_problem(&case.graph, &entries)?;
    let res = exhaustive_oracle(&split, mode, parallelism(args.sequential))?;
    let file = OracleFile {
        objective: res.objective,
        on: res.schedule.triplets(),
        feasible_points: res.feasible_points,
        recourse_feasible_points: res.recourse_feasible_points,
        corners: res.corners,
    };
    write(&args.out, "oracle.json", &pretty(&file))?;
    Ok(format!("oracle objective {}\n", res.objective))
}

fn row_from(rep: &RunReport, mc: Option<&McSummary>) -> ReportRow {
    match mc {
        Some(m) => ReportRow {
            label: rep.label.clone(),
            power_cost: m.term_means.purchase_cost,
            main_products: m.term_means.main_revenue,
            by_products: m.term_means.by_revenue,
            objective: m.mean_objective,
            source: "monte_carlo".into(),
        },
        None => ReportRow {
            label: rep.label.clone(),
            power_cost: rep.worst_case.purchase_cost,
            main_products: rep.worst_case.main_revenue,
            by_products: rep.worst_case.by_revenue,
            objective: rep.objective,
            source: "worst_case".into(),
        },
    }
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let label_w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:<label_w$}", "Run");
    for c in REPORT_COLUMNS {
        write!(s, " | {c:>13}").unwrap();
    }
    s.push('\n');
    s.push_str(&"-".repeat(label_w + REPORT_COLUMNS.len() * 16));
    s.push('\n');
    for r in rows {
        write!(s, "{:<label_w$}", r.label).unwrap();
        for v in [r.power_cost, r.main_products, r.by_products, r.objective] {
            write!(s, " | {v:>13.2}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Table over the runs, plus `hourly.csv` with each run's per-hour
/// equipment energy and net purchase for plotting.
pub fn cmd_report(args: &ReportArgs) -> Result<String, CliError> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for dir in &args.runs {
        let path = dir.join("report.json");
        if !path.is_file() {
            return Err(CliError::MissingRun(dir.clone()));
        }
        let rep: RunReport = read_json(&path)?;
        let mc_path = dir.join("mc.json");
        let mc: Option<McSummary> = if mc_path.is_file() { Some(read_json(&mc_path)?) } else { None };
        rows.push(row_from(&rep, mc.as_ref()));
        reports.push(rep);
    }
    let table = render_table(&rows);
    write(&args.out, "table.txt", &table)?;
    write(&args.out, "table.json", &pretty(&rows))?;

    let hz = reports.iter().map(|r| r.worst_case.hourly.energy.len()).max().unwrap_or(0);
    let mut csv = String::from("hour");
    for r in &reports {
        write!(csv, ",{0}_energy,{0}_net_purchase", r.label).unwrap();
    }
    csv.push('\n');
    for h in 0..hz {
        write!(csv, "{h}").unwrap();
        for r in &reports {
            let hr = &r.worst_case.hourly;
            let e = hr.energy.get(h).copied().unwrap_or(f64::NAN);
            let p = hr.net_purchase.get(h).copied().unwrap_or(f64::NAN);
            write!(csv, ",{e},{p}").unwrap();
        }
        csv.push('\n');
    }
    write(&args.out, "hourly.csv", &csv)?;
    Ok(table)
}

pub fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Report(a) => cmd_report(a),
    }
}
