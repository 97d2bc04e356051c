//! Deterministic evaluation of a schedule under a fixed realization.

use serde::{Deserialize, Serialize};

use super::{EnergyDispatch, FactoryError, FactoryGraph, ScheduleDecision, UncertaintyRealization};

/// Tolerance for feasibility checks on continuous quantities.
const FEAS_TOL: f64 = 1e-7;

/// First-stage quantities implied by the binaries and realized yields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Production {
    /// Equipment hours `T^h`.
    pub time: Vec<f64>,
    /// Transport hours `sum_m |dW| dt_m / k_m`.
    pub transport: Vec<f64>,
    /// Production energy `E^h`.
    pub energy: Vec<f64>,
    /// Output `G[h][n]`.
    pub output: Vec<Vec<f64>>,
    /// Input `C[h][n]`.
    pub input: Vec<Vec<f64>>,
    /// Net buffer flow `dW[h][m]` (before by-product sales).
    pub flow: Vec<Vec<f64>>,
}

pub fn production(graph: &FactoryGraph, schedule: &ScheduleDecision, yields: &[Vec<Vec<f64>>]) -> Production {
    let hz = graph.horizon;
    let nw = graph.workshops.len();
    let mut p = Production {
        time: vec![0.0; hz],
        transport: vec![0.0; hz],
        energy: vec![0.0; hz],
        output: vec![vec![0.0; nw]; hz],
        input: vec![vec![0.0; nw]; hz],
        flow: vec![vec![0.0; graph.buffers.len()]; hz],
    };
    let producers: Vec<Vec<usize>> = (0..graph.buffers.len()).map(|m| graph.producers(m)).collect();
    let consumers: Vec<Vec<usize>> = (0..graph.buffers.len()).map(|m| graph.consumers(m)).collect();
    for h in 0..hz {
        for (n, w) in graph.workshops.iter().enumerate() {
            for (q, opt) in w.options.iter().enumerate() {
                if schedule.on[h][n][q] {
                    p.time[h] += opt.time_cost;
                    p.energy[h] += opt.energy_cost;
                    p.output[h][n] += opt.output_qty * yields[h][n][q];
                    p.input[h][n] += opt.input_qty;
                }
            }
        }
        for (m, b) in graph.buffers.iter().enumerate() {
            let f = producers[m].iter().map(|&n| p.output[h][n]).sum::<f64>()
                - consumers[m].iter().map(|&n| p.input[h][n]).sum::<f64>();
            p.flow[h][m] = f;
            p.transport[h] += f.abs() * b.transport_time / b.transport_batch;
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyReport {
    pub equipment_time: Vec<f64>,
    pub transport_time: Vec<f64>,
    pub energy: Vec<f64>,
    pub net_purchase: Vec<f64>,
    pub purchase_cost: Vec<f64>,
    /// Battery state `S^0..=S^H`.
    pub soc: Vec<f64>,
    /// Buffer levels `[h][m]` for `h = 0..=H`.
    pub buffers: Vec<Vec<f64>>,
    pub byproduct_sales: Vec<f64>,
    pub zeta: Vec<f64>,
    pub fr_deviation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub equipment_cost: f64,
    pub degradation_cost: f64,
    pub purchase_cost: f64,
    pub fr_penalty: f64,
    pub main_revenue: f64,
    pub by_revenue: f64,
    pub objective: f64,
    pub hourly: HourlyReport,
}

impl CostReport {
    /// Signed sum of the six terms.
    pub fn recomputed_objective(&self) -> f64 {
        self.equipment_cost + self.degradation_cost + self.purchase_cost + self.fr_penalty
            - self.main_revenue
            - self.by_revenue
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

fn infeasible(hour: usize, constraint: &str, detail: String) -> FactoryError {
    FactoryError::InfeasibleSchedule { hour, constraint: constraint.into(), detail }
}

fn check_shapes(
    graph: &FactoryGraph,
    s: &ScheduleDecision,
    d: &EnergyDispatch,
    r: &UncertaintyRealization,
) -> Result<(), FactoryError> {
    let hz = graph.horizon;
    let counts = graph.option_counts();
    let shape_ok = |t: &Vec<Vec<bool>>| t.len() == counts.len() && t.iter().zip(&counts).all(|(w, &c)| w.len() == c);
    let yshape_ok = |t: &Vec<Vec<f64>>| t.len() == counts.len() && t.iter().zip(&counts).all(|(w, &c)| w.len() == c);
    let lens = [
        s.on.len(),
        s.byproduct_sales.len(),
        d.e_eu.len(),
        d.e_lu.len(),
        d.e_su.len(),
        d.e_fr.len(),
        r.yields.len(),
        r.expected_load.len(),
        r.zeta.len(),
    ];
    if lens.iter().any(|&l| l != hz) || !s.on.iter().all(shape_ok) || !r.yields.iter().all(yshape_ok) {
        return Err(infeasible(0, "shape", "schedule, dispatch or realization does not match the factory".into()));
    }
    Ok(())
}

/// Checks the production rules that only involve the binaries.
pub fn check_binaries(graph: &FactoryGraph, s: &ScheduleDecision) -> Result<(), FactoryError> {
    let hz = graph.horizon;
    for h in 0..hz {
        for (n, w) in s.on[h].iter().enumerate() {
            if w.iter().filter(|&&b| b).count() > 1 {
                return Err(infeasible(h, "service_uniqueness", format!("workshop {n} runs more than one option")));
            }
        }
    }
    for o in graph.option_refs() {
        let opt = graph.option(o);
        let uses = (0..hz).filter(|&h| s.is_on(h, o)).count();
        if uses > opt.max_daily_uses {
            return Err(infeasible(hz - 1, "daily_uses", format!("option {o} used {uses} times, cap {}", opt.max_daily_uses)));
        }
        for h in 0..hz {
            let started = s.is_on(h, o) && (h == 0 || !s.is_on(h - 1, o));
            if !started {
                continue;
            }
            for t in 1..opt.min_uptime {
                if h + t < hz && !s.is_on(h + t, o) {
                    return Err(infeasible(h + t, "min_uptime", format!("option {o} started at {h} stopped before {} hours", opt.min_uptime)));
                }
            }
        }
    }
    Ok(())
}

/// Evaluates a schedule and dispatch under a fixed realization.
///
/// Fails only for infeasible plans; economically poor plans get a report.
pub fn simulate_schedule(
    graph: &FactoryGraph,
    schedule: &ScheduleDecision,
    dispatch: &EnergyDispatch,
    real: &UncertaintyRealization,
) -> Result<CostReport, FactoryError> {
    check_shapes(graph, schedule, dispatch, real)?;
    check_binaries(graph, schedule)?;
    let hz = graph.horizon;
    let e = &graph.energy;
    let prod = production(graph, schedule, &real.yields);
    let outlet = graph.outlet();

    let mut levels = vec![(0..graph.buffers.len()).map(|m| graph.initial_stock(m)).collect::<Vec<f64>>()];
    for h in 0..hz {
        let sale = schedule.byproduct_sales[h];
        if sale < -FEAS_TOL {
            return Err(infeasible(h, "sales_nonneg", format!("negative sale {sale}")));
        }
        match outlet {
            Some(m) if sale > levels[h][m] + FEAS_TOL => {
                return Err(infeasible(h, "sales_cap", format!("sale {sale} exceeds stock {}", levels[h][m])));
            }
            None if sale > FEAS_TOL => {
                return Err(infeasible(h, "sales_cap", "no by-product outlet to sell from".into()));
            }
            _ => {}
        }
        let mut next = levels[h].clone();
        for (m, lvl) in next.iter_mut().enumerate() {
            *lvl += prod.flow[h][m];
            if Some(m) == outlet {
                *lvl -= sale;
            }
            if *lvl < -FEAS_TOL {
                return Err(infeasible(h + 1, "buffer_nonneg", format!("buffer {} drops to {lvl}", graph.buffers[m].id)));
            }
        }
        levels.push(next);
    }

    let mut soc = vec![e.bess_initial];
    let mut net = vec![0.0; hz];
    let mut fr_dev = vec![0.0; hz];
    for h in 0..hz {
        for (name, v) in [("e_eu", dispatch.e_eu[h]), ("e_lu", dispatch.e_lu[h]), ("e_su", dispatch.e_su[h])] {
            if v < -FEAS_TOL {
                return Err(infeasible(h, "dispatch_nonneg", format!("{name} = {v}")));
            }
        }
        net[h] = prod.energy[h] - dispatch.e_eu[h] - dispatch.e_lu[h];
        if net[h] < -FEAS_TOL {
            return Err(infeasible(h, "net_purchase", format!("net purchase {} is negative", net[h])));
        }
        if let Some(cap) = &e.grid_cap {
            if net[h] > cap[h] + FEAS_TOL {
                return Err(infeasible(h, "grid_cap", format!("net purchase {} above cap {}", net[h], cap[h])));
            }
        }
        if dispatch.e_su[h] + dispatch.e_lu[h] > e.der_output[h] + FEAS_TOL {
            return Err(infeasible(h, "der_budget", "DER use exceeds availability".into()));
        }
        let s_next = soc[h] - e.discharge_eff * dispatch.e_eu[h] + e.charge_eff * dispatch.e_su[h];
        if s_next < -FEAS_TOL || s_next > e.bess_capacity + FEAS_TOL {
            return Err(infeasible(h, "soc_bounds", format!("state of charge {s_next} outside [0, {}]", e.bess_capacity)));
        }
        let step = (s_next - soc[h]).abs();
        if step > e.ramp_hi + FEAS_TOL || step < e.ramp_lo - FEAS_TOL {
            return Err(infeasible(h, "soc_ramp", format!("step {step} outside [{}, {}]", e.ramp_lo, e.ramp_hi)));
        }
        soc.push(s_next);
        fr_dev[h] = (net[h] - real.expected_load[h]).abs();
        if dispatch.e_fr[h] < fr_dev[h] - FEAS_TOL {
            return Err(infeasible(h, "fr_deviation", format!("penalty {} below deviation {}", dispatch.e_fr[h], fr_dev[h])));
        }
    }

    let equipment_cost = e.equipment_rate * (prod.time.iter().sum::<f64>() + prod.transport.iter().sum::<f64>());
    let degradation_cost = e.degr_coeff * soc[1..].iter().sum::<f64>();
    let purchase: Vec<f64> = (0..hz).map(|h| net[h] * e.rtp[h]).collect();
    let purchase_cost = purchase.iter().sum();
    let fr_penalty = e.fr_weight * dispatch.e_fr.iter().sum::<f64>();
    let main_revenue = graph.main_buffer().map_or(0.0, |m| e.sale_price_main * levels[hz][m]);
    let by_revenue = e.sale_price_by * (0..hz).map(|h| real.zeta[h] * schedule.byproduct_sales[h]).sum::<f64>();
    let mut report = CostReport {
        equipment_cost,
        degradation_cost,
        purchase_cost,
        fr_penalty,
        main_revenue,
        by_revenue,
        objective: 0.0,
        hourly: HourlyReport {
            equipment_time: prod.time,
            transport_time: prod.transport,
            energy: prod.energy,
            net_purchase: net,
            purchase_cost: purchase,
            soc,
            buffers: levels,
            byproduct_sales: schedule.byproduct_sales.clone(),
            zeta: real.zeta.clone(),
            fr_deviation: fr_dev,
        },
    };
    report.objective = report.recomputed_objective();
    Ok(report)
}
