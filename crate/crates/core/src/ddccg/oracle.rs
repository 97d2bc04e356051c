//! Worst-case recourse over the load box, and the exhaustive reference solver.

use serde::{Deserialize, Serialize};

use super::model::{fixed_inputs, recourse_lp, RecourseInputs, RecourseVars};
use super::{wx_values, DdccgError, ProblemSplit, WxValues, ZetaMode};
use crate::factory::{production, EnergyDispatch, FactoryGraph, ScheduleDecision};
use crate::optkernel::{solve_lp, OptSolution, SolveStatus};
use crate::parallel::{map_indexed, Parallelism};

/// Largest number of uncertain hours enumerated jointly.
pub const MAX_EXACT_HOURS: usize = 12;

/// Largest first-stage binary count the exhaustive solver accepts.
pub const MAX_ORACLE_BINARIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerMode {
    /// All corners jointly; falls back to greedy above [`MAX_EXACT_HOURS`].
    #[default]
    Exact,
    /// Coordinate ascent over hours, one flip at a time.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleOptions {
    pub corners: CornerMode,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpStatus {
    Optimal,
    /// No recourse exists; the value is `+inf` and a feasibility cut follows.
    Infeasible,
}

/// Recourse decision for one load realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDispatch {
    pub expected_load: Vec<f64>,
    pub value: f64,
    pub dispatch: EnergyDispatch,
    pub byproduct_sales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpResult {
    pub status: SpStatus,
    pub value: f64,
    pub u_star: Vec<f64>,
    pub y_star: Option<ScenarioDispatch>,
    /// Every realization evaluated, in evaluation order.
    pub scenarios: Vec<ScenarioDispatch>,
    /// True when the corner search was not exhaustive.
    pub heuristic: bool,
}

/// Hours whose box has positive width.
fn varying_hours(bx: &[(f64, f64)]) -> Vec<usize> {
    bx.iter().enumerate().filter(|(_, (lo, hi))| hi - lo > 1e-12).map(|(h, _)| h).collect()
}

fn corner(bx: &[(f64, f64)], hours: &[usize], index: usize) -> Vec<f64> {
    let mut u: Vec<f64> = bx.iter().map(|b| b.0).collect();
    for (j, &h) in hours.iter().enumerate() {
        if index >> j & 1 == 1 {
            u[h] = bx[h].1;
        }
    }
    u
}

/// Number of extreme points of the load box.
pub fn corner_count(split: &ProblemSplit) -> Result<usize, DdccgError> {
    Ok(1usize << varying_hours(&split.load_box()?).len())
}

fn extract(sol: &OptSolution, v: &RecourseVars, u: &[f64]) -> ScenarioDispatch {
    let get = |ids: &[crate::optkernel::VarId]| ids.iter().map(|&i| sol.value(i).max(0.0)).collect::<Vec<f64>>();
    let hz = u.len();
    ScenarioDispatch {
        expected_load: u.to_vec(),
        value: sol.objective_value,
        dispatch: EnergyDispatch { e_eu: get(&v.e_eu), e_lu: get(&v.e_lu), e_su: get(&v.e_su), e_fr: get(&v.e_fr) },
        byproduct_sales: if v.sales.is_empty() { vec![0.0; hz] } else { get(&v.sales) },
    }
}

/// `None` when the recourse is infeasible.
fn evaluate(graph: &FactoryGraph, inputs: &RecourseInputs, u: &[f64]) -> Result<Option<ScenarioDispatch>, DdccgError> {
    let (model, vars) = recourse_lp(graph, inputs, u);
    let sol = solve_lp(&model).map_err(DdccgError::OracleFailure)?;
    match sol.status {
        SolveStatus::Optimal => Ok(Some(extract(&sol, &vars, u))),
        SolveStatus::Infeasible => Ok(None),
        SolveStatus::Unbounded => Err(DdccgError::OracleFailure(crate::optkernel::KernelError::UnboundedRelaxation)),
    }
}

fn infeasible(u: Vec<f64>, scenarios: Vec<ScenarioDispatch>, heuristic: bool) -> SpResult {
    SpResult { status: SpStatus::Infeasible, value: f64::INFINITY, u_star: u, y_star: None, scenarios, heuristic }
}

/// Worst case over the load box of the recourse LP for a fixed first stage.
///
/// Ties between corners go to the lowest corner index (bit `j` set means the
/// `j`-th uncertain hour sits at its upper end).
pub fn solve_sp_oracle(
    split: &ProblemSplit,
    x: &ScheduleDecision,
    wx: &WxValues,
    opts: &OracleOptions,
) -> Result<SpResult, DdccgError> {
    let bx = split.load_box()?;
    let hours = varying_hours(&bx);
    let inputs = fixed_inputs(&split.graph, x, wx);
    let g = &split.graph;
    let exact = opts.corners == CornerMode::Exact && hours.len() <= MAX_EXACT_HOURS;
    if exact {
        let n = 1usize << hours.len();
        let results = map_indexed(n, opts.parallelism, |i| evaluate(g, &inputs, &corner(&bx, &hours, i)));
        let mut scenarios: Vec<ScenarioDispatch> = Vec::with_capacity(n);
        let mut best = 0;
        for (i, r) in results.into_iter().enumerate() {
            match r? {
                Some(s) => {
                    if i == 0 || s.value > scenarios[best].value {
                        best = i;
                    }
                    scenarios.push(s);
                }
                None => return Ok(infeasible(corner(&bx, &hours, i), scenarios, false)),
            }
        }
        let y = scenarios[best].clone();
        return Ok(SpResult { status: SpStatus::Optimal, value: y.value, u_star: y.expected_load.clone(), y_star: Some(y), scenarios, heuristic: false });
    }

    let mut index = 0usize;
    let mut scenarios = Vec::new();
    let Some(mut best) = evaluate(g, &inputs, &corner(&bx, &hours, 0))? else {
        return Ok(infeasible(corner(&bx, &hours, 0), scenarios, true));
    };
    scenarios.push(best.clone());
    for j in 0..hours.len() {
        let cand = index | 1 << j;
        match evaluate(g, &inputs, &corner(&bx, &hours, cand))? {
            Some(s) => {
                if s.value > best.value {
                    best = s.clone();
                    index = cand;
                }
                scenarios.push(s);
            }
            None => return Ok(infeasible(corner(&bx, &hours, cand), scenarios, true)),
        }
    }
    Ok(SpResult { status: SpStatus::Optimal, value: best.value, u_star: best.expected_load.clone(), y_star: Some(best), scenarios, heuristic: true })
}

/// Equipment cost minus main-product revenue for a fixed first stage.
pub fn first_stage_cost(graph: &FactoryGraph, x: &ScheduleDecision, alpha: &[Vec<Vec<f64>>]) -> f64 {
    let e = &graph.energy;
    let prod = production(graph, x, alpha);
    let hours: f64 = prod.time.iter().sum::<f64>() + prod.transport.iter().sum::<f64>();
    let revenue = graph.main_buffer().map_or(0.0, |m| {
        e.sale_price_main * (graph.initial_stock(m) + prod.flow.iter().map(|f| f[m]).sum::<f64>())
    });
    e.equipment_rate * hours - revenue
}

/// Whether the first-stage rules hold: binary rules plus nonnegative buffer
/// levels (outlet counted without sales) under the tightened yields.
pub fn first_stage_feasible(graph: &FactoryGraph, x: &ScheduleDecision, alpha: &[Vec<Vec<f64>>]) -> bool {
    if crate::factory::check_binaries(graph, x).is_err() {
        return false;
    }
    let prod = production(graph, x, alpha);
    (0..graph.buffers.len()).all(|m| {
        let mut lvl = graph.initial_stock(m);
        prod.flow.iter().all(|f| {
            lvl += f[m];
            lvl >= -1e-9
        })
    })
}

/// Every binary tensor obeying uniqueness (at most one option per workshop
/// and hour), in odometer order. Other rules are checked separately.
pub fn candidate_schedules(graph: &FactoryGraph) -> Vec<ScheduleDecision> {
    let slots: Vec<(usize, usize)> =
        (0..graph.horizon).flat_map(|h| (0..graph.workshops.len()).map(move |n| (h, n))).collect();
    let radix: Vec<usize> = slots.iter().map(|&(_, n)| graph.workshops[n].options.len() + 1).collect();
    let total: usize = radix.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; slots.len()];
    for _ in 0..total {
        let mut s = ScheduleDecision::idle(graph);
        for (k, &(h, n)) in slots.iter().enumerate() {
            if digits[k] > 0 {
                s.on[h][n][digits[k] - 1] = true;
            }
        }
        out.push(s);
        for k in 0..digits.len() {
            digits[k] += 1;
            if digits[k] < radix[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// First-stage feasible points with their tightened uncertainty.
pub fn first_stage_points(split: &ProblemSplit, mode: ZetaMode) -> Result<Vec<(ScheduleDecision, WxValues)>, DdccgError> {
    let mut out = Vec::new();
    for x in candidate_schedules(&split.graph) {
        if crate::factory::check_binaries(&split.graph, &x).is_err() {
            continue;
        }
        let wx = wx_values(split, &x, mode)?;
        if first_stage_feasible(&split.graph, &x, &wx.alpha) {
            out.push((x, wx));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub objective: f64,
    pub schedule: ScheduleDecision,
    pub worst_case: SpResult,
    /// First-stage feasible points (N_x).
    pub feasible_points: usize,
    /// Points whose recourse is feasible under every realization.
    pub recourse_feasible_points: usize,
    pub corners: usize,
}

/// Exhaustive min over first-stage points of max over box corners of the
/// recourse LP, with the first-stage uncertainty tightened per point.
pub fn exhaustive_oracle(split: &ProblemSplit, mode: ZetaMode, parallelism: Parallelism) -> Result<OracleResult, DdccgError> {
    let binaries = split.graph.num_first_stage_binaries();
    if binaries > MAX_ORACLE_BINARIES {
        return Err(DdccgError::TooLargeForOracle { binaries, limit: MAX_ORACLE_BINARIES });
    }
    let points = first_stage_points(split, mode)?;
    let inner = OracleOptions { corners: CornerMode::Exact, parallelism: Parallelism::Sequential };
    let evals = map_indexed(points.len(), parallelism, |i| {
        let (x, wx) = &points[i];
        solve_sp_oracle(split, x, wx, &inner).map(|sp| (first_stage_cost(&split.graph, x, &wx.alpha) + sp.value, sp))
    });
    let mut best: Option<(f64, usize, SpResult)> = None;
    let mut recourse_ok = 0;
    for (i, r) in evals.into_iter().enumerate() {
        let (v, sp) = r?;
        if sp.status != SpStatus::Optimal {
            continue;
        }
        recourse_ok += 1;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, i, sp));
        }
    }
    let Some((objective, i, worst_case)) = best else {
        return Err(DdccgError::InfeasibleInstance);
    };
    let mut schedule = points[i].0.clone();
    schedule.byproduct_sales = worst_case.y_star.as_ref().map(|y| y.byproduct_sales.clone()).unwrap_or_default();
    Ok(OracleResult {
        objective,
        schedule,
        worst_case,
        feasible_points: points.len(),
        recourse_feasible_points: recourse_ok,
        corners: corner_count(split)?,
    })
}
