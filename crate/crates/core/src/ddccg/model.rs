//! Master problem and recourse builders.

use serde::{Deserialize, Serialize};

use super::{CutKind, CutPool, DdccgError, ProblemSplit, WxValues, ZetaMode};
use crate::ddu::{theta_band, yield_output_expr, and_variable, ProductStructureIdm};
use crate::factory::{production, FactoryGraph, OptionRef, ScheduleDecision};
use crate::optkernel::{LinExpr, OptModel, Relation, Sense, VarId};

/// First-stage quantities the recourse depends on, as expressions in the
/// master variables (or constants once the first stage is fixed).
#[derive(Debug, Clone)]
pub(crate) struct RecourseInputs {
    pub energy: Vec<LinExpr>,
    /// Outlet level without sales, hours `0..=H`.
    pub outlet_level: Option<Vec<LinExpr>>,
    /// Per hour: (by-product weight, activity indicator).
    pub zeta: Vec<Vec<(f64, LinExpr)>>,
    pub sales_cap: f64,
}

/// Recourse variables of one copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseVars {
    pub e_eu: Vec<VarId>,
    pub e_lu: Vec<VarId>,
    pub e_su: Vec<VarId>,
    /// `S[1..=H]`.
    pub soc: Vec<VarId>,
    pub net: Vec<VarId>,
    pub e_fr: Vec<VarId>,
    pub sales: Vec<VarId>,
}

/// Upper bound on cumulative by-product sales: outlet stock plus everything
/// its producers could ever deliver.
pub(crate) fn sales_cap(graph: &FactoryGraph) -> f64 {
    let Some(m) = graph.outlet() else { return 0.0 };
    let per_hour: f64 = graph
        .producers(m)
        .iter()
        .map(|&n| graph.workshops[n].options.iter().map(|o| o.output_qty).fold(0.0, f64::max))
        .sum();
    graph.initial_stock(m) + per_hour * graph.horizon as f64
}

/// Valid lower bound on the recourse value: the only negative term is
/// by-product revenue, at most `s_s * sales_cap` since zeta <= 1.
pub(crate) fn psi_floor(graph: &FactoryGraph) -> f64 {
    -graph.energy.sale_price_by * sales_cap(graph) - 1.0
}

/// By-product weight contributed by state `i` at `hour` when the schedule
/// visits it there. The visit itself is the real-time observation.
pub(crate) fn state_weight(
    idm: &ProductStructureIdm,
    hour: usize,
    i: usize,
    mode: ZetaMode,
    sale_price_by: f64,
) -> Result<f64, DdccgError> {
    let hist = &idm.hist_counts[hour];
    let n = hist[i] as f64 + 1.0;
    let total = hist.iter().sum::<u64>() as f64 + 1.0;
    let band = theta_band(n, total, idm.s, idm.gamma, idm.priors[i])?;
    let theta = match mode {
        ZetaMode::Adversarial => adversarial_endpoint(band.lo, band.hi, sale_price_by),
        ZetaMode::PosteriorMean => band.posterior_mean,
    };
    Ok(idm.ratios[i] * theta)
}

/// The recourse value falls as zeta grows when the by-product sells at a
/// nonnegative price, so the adversary takes the low end.
pub(crate) fn adversarial_endpoint(lo: f64, hi: f64, sale_price_by: f64) -> f64 {
    if sale_price_by >= 0.0 {
        lo
    } else {
        hi
    }
}

/// Adds one recourse copy for a load realization `u`. Returns its
/// variables and its objective.
pub(crate) fn add_recourse(
    model: &mut OptModel,
    graph: &FactoryGraph,
    inp: &RecourseInputs,
    u: &[f64],
    suffix: &str,
) -> (RecourseVars, LinExpr) {
    let hz = graph.horizon;
    let e = &graph.energy;
    let cap = |h: usize| e.grid_cap.as_ref().map_or(f64::INFINITY, |c| c[h]);
    let mut v = RecourseVars {
        e_eu: Vec::with_capacity(hz),
        e_lu: Vec::with_capacity(hz),
        e_su: Vec::with_capacity(hz),
        soc: Vec::with_capacity(hz),
        net: Vec::with_capacity(hz),
        e_fr: Vec::with_capacity(hz),
        sales: Vec::new(),
    };
    for h in 0..hz {
        v.e_eu.push(model.add_nonneg(format!("E_EU[{h}]{suffix}")));
        v.e_lu.push(model.add_nonneg(format!("E_LU[{h}]{suffix}")));
        v.e_su.push(model.add_nonneg(format!("E_SU[{h}]{suffix}")));
        v.soc.push(model.add_continuous(format!("S[{}]{suffix}", h + 1), 0.0, e.bess_capacity));
        v.net.push(model.add_continuous(format!("Et[{h}]{suffix}"), 0.0, cap(h)));
        v.e_fr.push(model.add_nonneg(format!("E_fr[{h}]{suffix}")));
    }
    let mut obj = LinExpr::new();
    for h in 0..hz {
        let mut net = LinExpr::var(v.net[h]);
        net.add_term(v.e_eu[h], 1.0).add_term(v.e_lu[h], 1.0).add_scaled(&inp.energy[h], -1.0);
        model.add_constraint(format!("net_purchase[{h}]{suffix}"), net, Relation::Eq, 0.0);
        let mut der = LinExpr::var(v.e_su[h]);
        der.add_term(v.e_lu[h], 1.0);
        model.add_constraint(format!("der_budget[{h}]{suffix}"), der, Relation::Le, e.der_output[h]);

        let mut step = LinExpr::var(v.soc[h]);
        if h == 0 {
            step.add_constant(-e.bess_initial);
        } else {
            step.add_term(v.soc[h - 1], -1.0);
        }
        let mut transfer = step.clone();
        transfer.add_term(v.e_eu[h], e.discharge_eff).add_term(v.e_su[h], -e.charge_eff);
        model.add_constraint(format!("soc_transfer[{h}]{suffix}"), transfer, Relation::Eq, 0.0);
        model.add_constraint(format!("soc_ramp_up[{h}]{suffix}"), step.clone(), Relation::Le, e.ramp_hi);
        model.add_constraint(format!("soc_ramp_dn[{h}]{suffix}"), step, Relation::Ge, -e.ramp_hi);

        let mut up = LinExpr::var(v.e_fr[h]);
        up.add_term(v.net[h], -1.0);
        model.add_constraint(format!("fr_pos[{h}]{suffix}"), up, Relation::Ge, -u[h]);
        let mut dn = LinExpr::var(v.e_fr[h]);
        dn.add_term(v.net[h], 1.0);
        model.add_constraint(format!("fr_neg[{h}]{suffix}"), dn, Relation::Ge, u[h]);

        obj.add_term(v.net[h], e.rtp[h]);
        obj.add_term(v.e_fr[h], e.fr_weight);
        obj.add_term(v.soc[h], e.degr_coeff);
    }
    if let Some(level) = &inp.outlet_level {
        let mut cum = LinExpr::new();
        for h in 0..hz {
            let b = model.add_continuous(format!("B_ss[{h}]{suffix}"), 0.0, inp.sales_cap);
            v.sales.push(b);
            cum.add_term(b, 1.0);
            for (tag, lvl) in [("sales_cap", &level[h]), ("outlet_nonneg", &level[h + 1])] {
                let mut row = cum.clone();
                row.add_scaled(lvl, -1.0);
                model.add_constraint(format!("{tag}[{h}]{suffix}"), row, Relation::Le, 0.0);
            }
            for (j, (w, ind)) in inp.zeta[h].iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let z = model.add_continuous(format!("zsale[{h}][{j}]{suffix}"), 0.0, inp.sales_cap);
                let mut a = LinExpr::var(z);
                a.add_term(b, -1.0);
                model.add_constraint(format!("zsale_qty[{h}][{j}]{suffix}"), a, Relation::Le, 0.0);
                let mut c = LinExpr::var(z);
                c.add_scaled(ind, -inp.sales_cap);
                model.add_constraint(format!("zsale_on[{h}][{j}]{suffix}"), c, Relation::Le, 0.0);
                obj.add_term(z, -e.sale_price_by * w);
            }
        }
    }
    (v, obj)
}

/// Recourse inputs for a fixed first stage and fixed first-stage uncertainty.
pub(crate) fn fixed_inputs(graph: &FactoryGraph, x: &ScheduleDecision, wx: &WxValues) -> RecourseInputs {
    let prod = production(graph, x, &wx.alpha);
    let outlet_level = graph.outlet().map(|m| {
        let mut lvl = vec![LinExpr::constant(graph.initial_stock(m))];
        for h in 0..graph.horizon {
            let next = lvl[h].constant + prod.flow[h][m];
            lvl.push(LinExpr::constant(next));
        }
        lvl
    });
    RecourseInputs {
        energy: prod.energy.iter().map(|&e| LinExpr::constant(e)).collect(),
        outlet_level,
        zeta: wx.zeta.iter().map(|&z| vec![(z, LinExpr::constant(1.0))]).collect(),
        sales_cap: sales_cap(graph),
    }
}

/// Master problem for the current cut pool.
#[derive(Debug, Clone)]
pub struct MasterModel {
    pub model: OptModel,
    /// `x[h][n][p]`.
    pub x: Vec<Vec<Vec<VarId>>>,
    pub psi: VarId,
    /// Rows `psi >= recourse value of copy l`, one per optimality cut.
    pub psi_rows: Vec<usize>,
    /// First-stage part of the objective (equipment cost minus main revenue).
    pub first_stage_cost: LinExpr,
    /// Recourse copies in pool order.
    pub copies: Vec<RecourseVars>,
}

impl MasterModel {
    pub fn schedule(&self, values: &[f64], horizon: usize) -> ScheduleDecision {
        ScheduleDecision {
            on: (0..horizon)
                .map(|h| self.x[h].iter().map(|w| w.iter().map(|&v| values[v.0] > 0.5).collect()).collect())
                .collect(),
            byproduct_sales: vec![0.0; horizon],
        }
    }
}

/// First-stage variables, rules and cost; returns the recourse inputs as
/// expressions in the master variables.
fn add_first_stage(
    model: &mut OptModel,
    split: &ProblemSplit,
    mode: ZetaMode,
) -> Result<(Vec<Vec<Vec<VarId>>>, LinExpr, RecourseInputs), DdccgError> {
    let g = &split.graph;
    let hz = g.horizon;
    let nb = g.buffers.len();
    let x: Vec<Vec<Vec<VarId>>> = (0..hz)
        .map(|h| {
            g.workshops
                .iter()
                .enumerate()
                .map(|(n, w)| (0..w.options.len()).map(|p| model.add_binary(format!("I[{h}][{n}][{p}]"))).collect())
                .collect()
        })
        .collect();
    for (h, xh) in x.iter().enumerate() {
        for (n, w) in xh.iter().enumerate() {
            let mut e = LinExpr::new();
            w.iter().for_each(|&v| {
                e.add_term(v, 1.0);
            });
            model.add_constraint(format!("service_uniqueness[{h}][{n}]"), e, Relation::Le, 1.0);
        }
    }
    for o in g.option_refs() {
        let opt = g.option(o);
        let (n, p) = (o.workshop, o.option);
        if opt.max_daily_uses < hz {
            let mut e = LinExpr::new();
            x.iter().for_each(|xh| {
                e.add_term(xh[n][p], 1.0);
            });
            model.add_constraint(format!("daily_uses[{n}][{p}]"), e, Relation::Le, opt.max_daily_uses as f64);
        }
        for h in 0..hz {
            for k in 1..opt.min_uptime {
                if h + k >= hz {
                    break;
                }
                let mut e = LinExpr::term(x[h + k][n][p], 1.0);
                e.add_term(x[h][n][p], -1.0);
                if h > 0 {
                    e.add_term(x[h - 1][n][p], 1.0);
                }
                model.add_constraint(format!("min_uptime[{h}][{n}][{p}][{k}]"), e, Relation::Ge, 0.0);
            }
        }
    }

    let producers: Vec<Vec<usize>> = (0..nb).map(|m| g.producers(m)).collect();
    let consumers: Vec<Vec<usize>> = (0..nb).map(|m| g.consumers(m)).collect();
    let e = &g.energy;
    let mut cost = LinExpr::new();
    let mut energy = Vec::with_capacity(hz);
    let mut level: Vec<Vec<LinExpr>> = vec![(0..nb).map(|m| LinExpr::constant(g.initial_stock(m))).collect()];
    for h in 0..hz {
        let mut en = LinExpr::new();
        let mut output: Vec<LinExpr> = vec![LinExpr::new(); g.workshops.len()];
        for o in g.option_refs() {
            let opt = g.option(o);
            let v = x[h][o.workshop][o.option];
            cost.add_term(v, e.equipment_rate * opt.time_cost);
            en.add_term(v, opt.energy_cost);
            if opt.output_qty != 0.0 {
                let alpha_i = match split.yields() {
                    Some(y) => yield_output_expr(model, y, h, o, &x[h], opt.yield_rate),
                    None => LinExpr::term(v, opt.yield_rate),
                };
                output[o.workshop].add_scaled(&alpha_i, opt.output_qty);
            }
        }
        energy.push(en);
        let mut next = Vec::with_capacity(nb);
        for m in 0..nb {
            let mut flow = LinExpr::new();
            for &n in &producers[m] {
                flow.add_scaled(&output[n], 1.0);
            }
            for &n in &consumers[m] {
                for (p, opt) in g.workshops[n].options.iter().enumerate() {
                    flow.add_term(x[h][n][p], -opt.input_qty);
                }
            }
            let buf = &g.buffers[m];
            let coef = e.equipment_rate * buf.transport_time / buf.transport_batch;
            if coef > 0.0 && !flow.normalized().terms.is_empty() {
                let tw = model.add_nonneg(format!("tw[{h}][{m}]"));
                let mut a = LinExpr::var(tw);
                a.add_scaled(&flow, -1.0);
                model.add_constraint(format!("transport_pos[{h}][{m}]"), a, Relation::Ge, 0.0);
                let mut b = LinExpr::var(tw);
                b.add_scaled(&flow, 1.0);
                model.add_constraint(format!("transport_neg[{h}][{m}]"), b, Relation::Ge, 0.0);
                cost.add_term(tw, coef);
            }
            let mut lvl = level[h][m].clone();
            lvl.add_scaled(&flow, 1.0);
            let lvl = lvl.normalized();
            if !lvl.terms.is_empty() {
                model.add_constraint(format!("buffer_nonneg[{}][{m}]", h + 1), lvl.clone(), Relation::Ge, 0.0);
            }
            next.push(lvl);
        }
        level.push(next);
    }
    if let Some(mb) = g.main_buffer() {
        cost.add_scaled(&level[hz][mb], -e.sale_price_main);
    }

    let mut zeta = vec![Vec::new(); hz];
    if let Some(idm) = split.idm() {
        for (h, zh) in zeta.iter_mut().enumerate() {
            for (i, st) in idm.states.iter().enumerate() {
                if !idm.is_byproduct_state(i) {
                    continue;
                }
                let w = state_weight(idm, h, i, mode, e.sale_price_by)?;
                let vars: Vec<VarId> = st.members.iter().map(|m: &OptionRef| x[h][m.workshop][m.option]).collect();
                let a = and_variable(model, &vars, &format!("state[{h}][{i}]"));
                zh.push((w, LinExpr::var(a)));
            }
        }
    }
    let inputs = RecourseInputs {
        energy,
        outlet_level: g.outlet().map(|m| level.iter().map(|l| l[m].clone()).collect()),
        zeta,
        sales_cap: sales_cap(g),
    };
    Ok((x, cost, inputs))
}

/// Master problem: first stage, `psi`, and one recourse copy per cut.
/// Optimality cuts also bound `psi`; feasibility cuts only add the copy.
pub fn build_master(split: &ProblemSplit, pool: &CutPool, mode: ZetaMode) -> Result<MasterModel, DdccgError> {
    let mut model = OptModel::new(Sense::Minimize);
    let (x, cost, inputs) = add_first_stage(&mut model, split, mode)?;
    let psi = model.add_continuous("psi", psi_floor(&split.graph), f64::INFINITY);
    let mut psi_rows = Vec::new();
    let mut copies = Vec::new();
    for cut in &pool.entries {
        let (vars, obj) = add_recourse(&mut model, &split.graph, &inputs, &cut.load, &format!("@{}", cut.iteration));
        if cut.kind == CutKind::Optimality {
            let mut row = LinExpr::var(psi);
            row.add_scaled(&obj, -1.0);
            psi_rows.push(model.add_constraint(format!("psi_cut@{}", cut.iteration), row, Relation::Ge, 0.0));
        }
        copies.push(vars);
    }
    let mut objective = cost.clone();
    objective.add_term(psi, 1.0);
    model.set_objective(Sense::Minimize, objective);
    Ok(MasterModel { model, x, psi, psi_rows, first_stage_cost: cost, copies })
}

/// The recourse LP for a fixed first stage and load realization.
pub(crate) fn recourse_lp(graph: &FactoryGraph, inputs: &RecourseInputs, u: &[f64]) -> (OptModel, RecourseVars) {
    let mut model = OptModel::new(Sense::Minimize);
    let (vars, obj) = add_recourse(&mut model, graph, inputs, u, "");
    model.set_objective(Sense::Minimize, obj);
    (model, vars)
}
