//! Column-and-constraint generation with decision-dependent tightening.
//!
//! Each iteration solves the master problem, fixes the first-stage
//! uncertainty (yields and by-product weight) at the incumbent schedule,
//! asks the oracle for the worst expected load, and adds a recourse copy for
//! it. The loop stops once the bounds meet.

mod model;
mod oracle;
mod split;

use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddu::{idm_interval, DduError, DduSpec, FrMomentModel};
use crate::factory::{FactoryError, FactoryGraph, OptionRef, ScheduleDecision};
use crate::optkernel::{solve_milp_with, KernelError, MilpOptions, SolveStatus};
use crate::parallel::Parallelism;

pub use model::{build_master, MasterModel, RecourseVars};
pub(crate) use model::{fixed_inputs, recourse_lp};
pub use oracle::{
    candidate_schedules, corner_count, exhaustive_oracle, first_stage_cost, first_stage_feasible, first_stage_points,
    solve_sp_oracle, CornerMode, OracleOptions, OracleResult, ScenarioDispatch, SpResult, SpStatus, MAX_EXACT_HOURS,
    MAX_ORACLE_BINARIES,
};
pub use split::{split_problem, DduEntry, ProblemSplit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdccgError {
    #[error("problem split: {0}")]
    Split(String),
    #[error(transparent)]
    Factory(#[from] FactoryError),
    #[error(transparent)]
    Ddu(#[from] DduError),
    #[error("master problem: {0}")]
    Kernel(KernelError),
    #[error("subproblem oracle: {0}")]
    OracleFailure(KernelError),
    #[error("no first-stage decision admits a recourse for every load")]
    InfeasibleInstance,
    #[error("{binaries} first-stage binaries exceed the oracle limit of {limit}")]
    TooLargeForOracle { binaries: usize, limit: usize },
    #[error("iteration limit reached after {} cuts", .trace.cuts)]
    IterationLimitExceeded { incumbent: Option<Box<CoSchedule>>, trace: Box<DdccgTrace> },
}

/// How the by-product weight is fixed once a schedule is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMode {
    /// The band endpoint that hurts the recourse most.
    #[default]
    Adversarial,
    /// Posterior mean; used by the variant that ignores the uncertainty.
    PosteriorMean,
}

/// First-stage uncertainty fixed at a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WxValues {
    /// `alpha[h][n][p]`.
    pub alpha: Vec<Vec<Vec<f64>>>,
    pub zeta: Vec<f64>,
}

fn active_states(split: &ProblemSplit, x: &ScheduleDecision) -> Vec<Option<usize>> {
    match split.idm() {
        Some(idm) => (0..split.graph.horizon).map(|h| idm.active_state(|o| x.is_on(h, o))).collect(),
        None => vec![None; split.graph.horizon],
    }
}

fn alpha_values(split: &ProblemSplit, x: &ScheduleDecision) -> Vec<Vec<Vec<f64>>> {
    let g = &split.graph;
    (0..g.horizon)
        .map(|h| {
            g.workshops
                .iter()
                .enumerate()
                .map(|(n, w)| {
                    w.options
                        .iter()
                        .enumerate()
                        .map(|(p, opt)| {
                            let o = OptionRef::new(n, p);
                            match split.yields() {
                                Some(y) if y.is_corrected(o) => y.corrected_floor(o, |m| x.is_on(h, m)),
                                _ => opt.yield_rate,
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Yields and by-product weight a schedule commits to, without touching the
/// stored counts. The schedule's own visit to a state counts as one
/// real-time observation, as in the master problem.
pub fn wx_values(split: &ProblemSplit, x: &ScheduleDecision, mode: ZetaMode) -> Result<WxValues, DdccgError> {
    let mut zeta = vec![0.0; split.graph.horizon];
    if let Some(idm) = split.idm() {
        for (h, a) in active_states(split, x).into_iter().enumerate() {
            if let Some(i) = a.filter(|&i| idm.is_byproduct_state(i)) {
                zeta[h] = model::state_weight(idm, h, i, mode, split.graph.energy.sale_price_by)?;
            }
        }
    }
    Ok(WxValues { alpha: alpha_values(split, x), zeta })
}

/// Records the schedule's state visits as real-time counts and fixes the
/// first-stage uncertainty at the resulting bands.
pub fn tighten_wx(split: &mut ProblemSplit, x: &ScheduleDecision, mode: ZetaMode) -> Result<WxValues, DdccgError> {
    let active = active_states(split, x);
    let alpha = alpha_values(split, x);
    let s_s = split.graph.energy.sale_price_by;
    let mut zeta = vec![0.0; split.graph.horizon];
    if let Some(idm) = split.idm_mut() {
        idm.set_rt_counts(&active);
        for (h, a) in active.iter().enumerate() {
            if let Some(i) = a.filter(|&i| idm.is_byproduct_state(i)) {
                let band = idm_interval(idm, h, i)?;
                let theta = match mode {
                    ZetaMode::Adversarial => model::adversarial_endpoint(band.lo, band.hi, s_s),
                    ZetaMode::PosteriorMean => band.posterior_mean,
                };
                zeta[h] = idm.ratios[i] * theta;
            }
        }
    }
    Ok(WxValues { alpha, zeta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Feasibility,
    Optimality,
}

/// A load realization whose recourse copy is part of the master problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub kind: CutKind,
    /// 1-based iteration that produced the cut; also the copy suffix.
    pub iteration: usize,
    pub load: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    pub entries: Vec<Cut>,
}

impl CutPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn optimality_count(&self) -> usize {
        self.entries.iter().filter(|c| c.kind == CutKind::Optimality).count()
    }

    /// Whether a cut of the same kind at this load is already present.
    pub fn contains(&self, kind: CutKind, load: &[f64]) -> bool {
        self.entries
            .iter()
            .any(|c| c.kind == kind && c.load.len() == load.len() && c.load.iter().zip(load).all(|(a, b)| (a - b).abs() <= 1e-9))
    }
}

/// Adds the cut for iteration `k`: an optimality cut when the subproblem
/// was finite, a feasibility cut otherwise.
pub fn add_cuts(pool: &mut CutPool, sp: &SpResult, k: usize) -> CutKind {
    let kind = match sp.status {
        SpStatus::Optimal => CutKind::Optimality,
        SpStatus::Infeasible => CutKind::Feasibility,
    };
    pool.entries.push(Cut { kind, iteration: k, load: sp.u_star.clone() });
    kind
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Absolute gap at which the loop stops.
    pub epsilon: f64,
    /// Most cuts the loop may add.
    pub max_iters: usize,
    pub corners: CornerMode,
    pub zeta: ZetaMode,
    pub parallelism: Parallelism,
    pub milp: MilpOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 200,
            corners: CornerMode::Exact,
            zeta: ZetaMode::Adversarial,
            parallelism: Parallelism::default(),
            milp: MilpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoSchedule {
    /// Binaries plus the by-product sales of the worst case.
    pub schedule: ScheduleDecision,
    /// Recourse per enumerated load realization.
    pub dispatch_policy: Vec<ScenarioDispatch>,
    pub objective: f64,
    pub gap: f64,
    pub lower_bound: f64,
    pub first_stage_cost: f64,
    pub wx: WxValues,
    pub worst_case: SpResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub sp_status: SpStatus,
    /// `None` when the loop stopped instead of cutting.
    pub cut_kind: Option<CutKind>,
    pub elapsed_ms: f64,
    pub x_star: Vec<(usize, usize, usize)>,
    pub psi: f64,
    pub sp_value: f64,
    pub u_star: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Tightened yields of the running options, `(h, n, p, alpha)`.
    pub alpha: Vec<(usize, usize, usize, f64)>,
    pub heuristic: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DdccgTrace {
    pub records: Vec<TraceRecord>,
    pub cuts: usize,
    pub converged: bool,
}

impl DdccgTrace {
    /// One JSON object per iteration.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn iterations(&self) -> usize {
        self.cuts
    }
}

pub fn run(graph: &FactoryGraph, entries: &[DduEntry], opts: &RunOptions) -> Result<(CoSchedule, DdccgTrace), DdccgError> {
    let split = split_problem(graph, entries)?;
    run_split(split, opts)
}

pub fn run_split(mut split: ProblemSplit, opts: &RunOptions) -> Result<(CoSchedule, DdccgTrace), DdccgError> {
    if !(opts.epsilon > 0.0) {
        return Err(DdccgError::Split(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let start = Instant::now();
    let hz = split.graph.horizon;
    let oracle_opts = OracleOptions { corners: opts.corners, parallelism: opts.parallelism };
    let mut pool = CutPool::default();
    let mut trace = DdccgTrace::default();
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut incumbent: Option<CoSchedule> = None;
    loop {
        let k = pool.len() + 1;
        let mp = build_master(&split, &pool, opts.zeta)?;
        let sol = solve_milp_with(&mp.model, &opts.milp).map_err(DdccgError::Kernel)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(DdccgError::InfeasibleInstance),
            SolveStatus::Unbounded => return Err(DdccgError::Kernel(KernelError::UnboundedRelaxation)),
        }
        // The master only gains rows, so its optimum cannot fall; clamp
        // solver noise.
        lb = lb.max(sol.objective_value);
        let psi = sol.value(mp.psi);
        let x = mp.schedule(&sol.values, hz);
        let wx = tighten_wx(&mut split, &x, opts.zeta)?;
        let sp = solve_sp_oracle(&split, &x, &wx, &oracle_opts)?;
        let fsc = first_stage_cost(&split.graph, &x, &wx.alpha);
        if sp.status == SpStatus::Optimal {
            let candidate = sol.objective_value - psi + sp.value;
            if candidate < ub {
                ub = candidate;
                let mut schedule = x.clone();
                schedule.byproduct_sales =
                    sp.y_star.as_ref().map(|y| y.byproduct_sales.clone()).unwrap_or_else(|| vec![0.0; hz]);
                incumbent = Some(CoSchedule {
                    schedule,
                    dispatch_policy: sp.scenarios.clone(),
                    objective: fsc + sp.value,
                    gap: 0.0,
                    lower_bound: lb,
                    first_stage_cost: fsc,
                    wx: wx.clone(),
                    worst_case: sp.clone(),
                });
            }
        }
        let gap = ub - lb;
        let mut record = TraceRecord {
            k,
            lb,
            ub,
            gap,
            sp_status: sp.status,
            cut_kind: None,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            x_star: x.triplets(),
            psi,
            sp_value: sp.value,
            u_star: sp.u_star.clone(),
            zeta: wx.zeta.clone(),
            alpha: x.triplets().into_iter().map(|(h, n, p)| (h, n, p, wx.alpha[h][n][p])).collect(),
            heuristic: sp.heuristic,
        };
        debug!("iteration {k}: lb {lb:.6} ub {ub:.6} sp {:?}", sp.status);

        let kind = match sp.status {
            SpStatus::Optimal => CutKind::Optimality,
            SpStatus::Infeasible => CutKind::Feasibility,
        };
        let repeated = pool.contains(kind, &sp.u_star);
        if gap <= opts.epsilon || repeated {
            if repeated && gap > opts.epsilon {
                warn!("scenario repeated with gap {gap:e}; stopping on solver tolerance");
            }
            trace.records.push(record);
            trace.converged = true;
            let mut best = incumbent.ok_or(DdccgError::InfeasibleInstance)?;
            best.gap = gap.max(0.0);
            best.lower_bound = lb;
            return Ok((best, trace));
        }
        if pool.len() >= opts.max_iters {
            trace.records.push(record);
            if let Some(inc) = incumbent.as_mut() {
                inc.gap = gap;
                inc.lower_bound = lb;
            }
            return Err(DdccgError::IterationLimitExceeded { incumbent: incumbent.map(Box::new), trace: Box::new(trace) });
        }
        record.cut_kind = Some(add_cuts(&mut pool, &sp, k));
        trace.cuts = pool.len();
        trace.records.push(record);
    }
}

/// The same plan with the uncertainty switched off: nominal yields, the
/// by-product weight at its posterior mean (pair with
/// [`ZetaMode::PosteriorMean`]) and a zero-width load box.
pub fn without_ddu(entries: &[DduEntry]) -> Vec<DduEntry> {
    entries
        .iter()
        .filter_map(|e| match &e.spec {
            DduSpec::Yield(_) => None,
            DduSpec::ProductStructure(_) => Some(e.clone()),
            DduSpec::FrMoment(f) => Some(DduEntry {
                spec: DduSpec::FrMoment(FrMomentModel { gamma1: 0.0, gamma2: 0.0, drift_k: 0.0, drift_b: 0.0, ..f.clone() }),
                couples: e.couples.clone(),
            }),
        })
        .collect()
}
