//! Explicit transcription of the deterministic model over named variables.
//!
//! Every quantity gets its own variable (`I[h][n][p]`, `T[h]`, `E[h]`,
//! `B[h][m]`, `S[h]`, ...) and every rule becomes a tagged block of rows, so
//! the result can be dumped and read line by line. The robust driver builds
//! leaner models of its own; this one is the reference.

use serde::{Deserialize, Serialize};

use super::simulate::production;
use super::{EnergyDispatch, FactoryGraph, ScheduleDecision, UncertaintyRealization};
use crate::optkernel::{LinExpr, OptModel, Relation, Sense, VarId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintBlock {
    pub tag: String,
    /// Row indices into `ConstraintSet::model.constraints`.
    pub rows: Vec<usize>,
}

/// The full deterministic model: rows grouped by rule, objective set to the
/// total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub model: OptModel,
    pub blocks: Vec<ConstraintBlock>,
}

impl ConstraintSet {
    pub fn block(&self, tag: &str) -> Option<&ConstraintBlock> {
        self.blocks.iter().find(|b| b.tag == tag)
    }

    /// Tags of blocks with a row violated by more than `tol`.
    pub fn violated_blocks(&self, values: &[f64], tol: f64) -> Vec<String> {
        self.blocks
            .iter()
            .filter(|b| {
                b.rows.iter().any(|&r| {
                    let c = &self.model.constraints[r];
                    !c.relation.holds(c.activity(values), c.rhs, tol)
                })
            })
            .map(|b| b.tag.clone())
            .collect()
    }
}

struct Emitter {
    model: OptModel,
    blocks: Vec<ConstraintBlock>,
}

impl Emitter {
    fn row(&mut self, tag: &str, name: String, expr: LinExpr, rel: Relation, rhs: f64) {
        let r = self.model.add_constraint(name, expr, rel, rhs);
        match self.blocks.iter_mut().find(|b| b.tag == tag) {
            Some(b) => b.rows.push(r),
            None => self.blocks.push(ConstraintBlock { tag: tag.into(), rows: vec![r] }),
        }
    }
}

/// Model under nominal yields, zero expected load and zero by-product weight.
pub fn emit_constraints(graph: &FactoryGraph) -> ConstraintSet {
    emit_constraints_with(graph, &UncertaintyRealization::nominal(graph))
}

pub fn emit_constraints_with(graph: &FactoryGraph, real: &UncertaintyRealization) -> ConstraintSet {
    let hz = graph.horizon;
    let e = &graph.energy;
    let nb = graph.buffers.len();
    let mut em = Emitter { model: OptModel::new(Sense::Minimize), blocks: Vec::new() };
    let m = &mut em.model;

    let x: Vec<Vec<Vec<VarId>>> = (0..hz)
        .map(|h| {
            graph
                .workshops
                .iter()
                .enumerate()
                .map(|(n, w)| (0..w.options.len()).map(|p| m.add_binary(format!("I[{h}][{n}][{p}]"))).collect())
                .collect()
        })
        .collect();
    let t: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("T[{h}]"))).collect();
    let en: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("E[{h}]"))).collect();
    let tt: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("Tt[{h}]"))).collect();
    let tw: Vec<Vec<VarId>> = (0..hz).map(|h| (0..nb).map(|b| m.add_nonneg(format!("tw[{h}][{b}]"))).collect()).collect();
    let bl: Vec<Vec<VarId>> = (0..=hz).map(|h| (0..nb).map(|b| m.add_free(format!("B[{h}][{b}]"))).collect()).collect();
    let outlet = graph.outlet();
    let bss: Vec<Option<VarId>> = (0..hz).map(|h| outlet.map(|_| m.add_nonneg(format!("B_ss[{h}]")))).collect();
    let eu: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("E_EU[{h}]"))).collect();
    let lu: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("E_LU[{h}]"))).collect();
    let su: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("E_SU[{h}]"))).collect();
    let s: Vec<VarId> = (0..=hz).map(|h| m.add_free(format!("S[{h}]"))).collect();
    let et: Vec<VarId> = (0..hz).map(|h| m.add_free(format!("Et[{h}]"))).collect();
    let fr: Vec<VarId> = (0..hz).map(|h| m.add_nonneg(format!("E_fr[{h}]"))).collect();

    for h in 0..hz {
        for (n, w) in graph.workshops.iter().enumerate() {
            let mut e1 = LinExpr::new();
            for p in 0..w.options.len() {
                e1.add_term(x[h][n][p], 1.0);
            }
            em.row("service_uniqueness", format!("unique[{h}][{n}]"), e1, Relation::Le, 1.0);
        }
    }
    for o in graph.option_refs() {
        let opt = graph.option(o);
        let mut e1 = LinExpr::new();
        for xh in &x {
            e1.add_term(xh[o.workshop][o.option], 1.0);
        }
        em.row("daily_uses", format!("uses[{}][{}]", o.workshop, o.option), e1, Relation::Le, opt.max_daily_uses as f64);
        for h in 0..hz {
            for k in 1..opt.min_uptime {
                if h + k >= hz {
                    break;
                }
                let mut e1 = LinExpr::term(x[h + k][o.workshop][o.option], 1.0);
                e1.add_term(x[h][o.workshop][o.option], -1.0);
                if h > 0 {
                    e1.add_term(x[h - 1][o.workshop][o.option], 1.0);
                }
                em.row("min_uptime", format!("uptime[{h}][{}][{}][{k}]", o.workshop, o.option), e1, Relation::Ge, 0.0);
            }
        }
    }

    let producers: Vec<Vec<usize>> = (0..nb).map(|b| graph.producers(b)).collect();
    let consumers: Vec<Vec<usize>> = (0..nb).map(|b| graph.consumers(b)).collect();
    for h in 0..hz {
        let mut tdef = LinExpr::var(t[h]);
        let mut edef = LinExpr::var(en[h]);
        for o in graph.option_refs() {
            let opt = graph.option(o);
            tdef.add_term(x[h][o.workshop][o.option], -opt.time_cost);
            edef.add_term(x[h][o.workshop][o.option], -opt.energy_cost);
        }
        em.row("time_def", format!("time[{h}]"), tdef, Relation::Eq, 0.0);
        em.row("energy_def", format!("energy[{h}]"), edef, Relation::Eq, 0.0);

        let mut ttdef = LinExpr::var(tt[h]);
        ttdef.add_term(t[h], -1.0);
        for b in 0..nb {
            let buf = &graph.buffers[b];
            let mut flow = LinExpr::new();
            for &n in &producers[b] {
                for (p, opt) in graph.workshops[n].options.iter().enumerate() {
                    flow.add_term(x[h][n][p], opt.output_qty * real.yields[h][n][p]);
                }
            }
            for &n in &consumers[b] {
                for (p, opt) in graph.workshops[n].options.iter().enumerate() {
                    flow.add_term(x[h][n][p], -opt.input_qty);
                }
            }
            let mut up = LinExpr::var(tw[h][b]);
            up.add_scaled(&flow, -1.0);
            em.row("transport_abs", format!("tw_pos[{h}][{b}]"), up, Relation::Ge, 0.0);
            let mut dn = LinExpr::var(tw[h][b]);
            dn.add_scaled(&flow, 1.0);
            em.row("transport_abs", format!("tw_neg[{h}][{b}]"), dn, Relation::Ge, 0.0);
            ttdef.add_term(tw[h][b], -buf.transport_time / buf.transport_batch);

            let mut bal = LinExpr::var(bl[h + 1][b]);
            bal.add_term(bl[h][b], -1.0);
            bal.add_scaled(&flow, -1.0);
            let tag = if Some(b) == outlet {
                bal.add_term(bss[h].expect("outlet has sales"), 1.0);
                "outlet_balance"
            } else {
                "buffer_balance"
            };
            em.row(tag, format!("balance[{h}][{b}]"), bal, Relation::Eq, 0.0);
        }
        em.row("transport_time", format!("ttilde[{h}]"), ttdef, Relation::Eq, 0.0);
        if let (Some(o), Some(v)) = (outlet, bss[h]) {
            let mut cap = LinExpr::var(v);
            cap.add_term(bl[h][o], -1.0);
            em.row("sales_cap", format!("sales_cap[{h}]"), cap, Relation::Le, 0.0);
        }
    }
    for b in 0..nb {
        em.row("initial_stock", format!("initial[{b}]"), LinExpr::var(bl[0][b]), Relation::Eq, graph.initial_stock(b));
        for (h, level) in bl.iter().enumerate().skip(1) {
            em.row("buffer_nonneg", format!("stock[{h}][{b}]"), LinExpr::var(level[b]), Relation::Ge, 0.0);
        }
    }

    em.row("soc_transfer", "soc_initial".into(), LinExpr::var(s[0]), Relation::Eq, e.bess_initial);
    for h in 0..hz {
        let mut net = LinExpr::var(et[h]);
        net.add_term(en[h], -1.0).add_term(eu[h], 1.0).add_term(lu[h], 1.0);
        em.row("net_purchase", format!("net[{h}]"), net, Relation::Eq, 0.0);
        em.row("net_purchase", format!("net_nonneg[{h}]"), LinExpr::var(et[h]), Relation::Ge, 0.0);
        if let Some(cap) = &e.grid_cap {
            em.row("grid_cap", format!("grid_cap[{h}]"), LinExpr::var(et[h]), Relation::Le, cap[h]);
        }
        let mut der = LinExpr::var(su[h]);
        der.add_term(lu[h], 1.0);
        em.row("der_budget", format!("der[{h}]"), der, Relation::Le, e.der_output[h]);
        let mut soc = LinExpr::var(s[h + 1]);
        soc.add_term(s[h], -1.0).add_term(eu[h], e.discharge_eff).add_term(su[h], -e.charge_eff);
        em.row("soc_transfer", format!("soc[{h}]"), soc, Relation::Eq, 0.0);
        em.row("soc_bounds", format!("soc_lo[{}]", h + 1), LinExpr::var(s[h + 1]), Relation::Ge, 0.0);
        em.row("soc_bounds", format!("soc_hi[{}]", h + 1), LinExpr::var(s[h + 1]), Relation::Le, e.bess_capacity);
        let mut step = LinExpr::var(s[h + 1]);
        step.add_term(s[h], -1.0);
        em.row("soc_ramp", format!("ramp_up[{h}]"), step.clone(), Relation::Le, e.ramp_hi);
        em.row("soc_ramp", format!("ramp_dn[{h}]"), step, Relation::Ge, -e.ramp_hi);
        let mut up = LinExpr::var(fr[h]);
        up.add_term(et[h], -1.0);
        em.row("fr_deviation", format!("fr_pos[{h}]"), up, Relation::Ge, -real.expected_load[h]);
        let mut dn = LinExpr::var(fr[h]);
        dn.add_term(et[h], 1.0);
        em.row("fr_deviation", format!("fr_neg[{h}]"), dn, Relation::Ge, real.expected_load[h]);
    }

    let mut obj = LinExpr::new();
    for h in 0..hz {
        obj.add_term(tt[h], e.equipment_rate);
        obj.add_term(s[h + 1], e.degr_coeff);
        obj.add_term(et[h], e.rtp[h]);
        obj.add_term(fr[h], e.fr_weight);
        if let Some(v) = bss[h] {
            obj.add_term(v, -e.sale_price_by * real.zeta[h]);
        }
    }
    if let Some(mb) = graph.main_buffer() {
        obj.add_term(bl[hz][mb], -e.sale_price_main);
    }
    em.model.set_objective(Sense::Minimize, obj);
    ConstraintSet { model: em.model, blocks: em.blocks }
}

/// Values for every variable of `emit_constraints_with(graph, real)` implied
/// by a schedule and dispatch, with absolute values taken exactly.
pub fn schedule_assignment(
    set: &ConstraintSet,
    graph: &FactoryGraph,
    schedule: &ScheduleDecision,
    dispatch: &EnergyDispatch,
    real: &UncertaintyRealization,
) -> Vec<f64> {
    let hz = graph.horizon;
    let e = &graph.energy;
    let prod = production(graph, schedule, &real.yields);
    let mut v = vec![0.0; set.model.num_vars()];
    let mut put = |name: String, val: f64| {
        if let Some(id) = set.model.var_id(&name) {
            v[id.0] = val;
        }
    };
    let outlet = graph.outlet();
    let mut level: Vec<f64> = (0..graph.buffers.len()).map(|b| graph.initial_stock(b)).collect();
    let mut soc = e.bess_initial;
    for (b, l) in level.iter().enumerate() {
        put(format!("B[0][{b}]"), *l);
    }
    put("S[0]".into(), soc);
    for h in 0..hz {
        for (h2, n, p) in schedule.triplets() {
            if h2 == h {
                put(format!("I[{h}][{n}][{p}]"), 1.0);
            }
        }
        put(format!("T[{h}]"), prod.time[h]);
        put(format!("E[{h}]"), prod.energy[h]);
        put(format!("Tt[{h}]"), prod.time[h] + prod.transport[h]);
        for (b, l) in level.iter_mut().enumerate() {
            put(format!("tw[{h}][{b}]"), prod.flow[h][b].abs());
            *l += prod.flow[h][b];
            if Some(b) == outlet {
                *l -= schedule.byproduct_sales[h];
            }
            put(format!("B[{}][{b}]", h + 1), *l);
        }
        put(format!("B_ss[{h}]"), schedule.byproduct_sales[h]);
        put(format!("E_EU[{h}]"), dispatch.e_eu[h]);
        put(format!("E_LU[{h}]"), dispatch.e_lu[h]);
        put(format!("E_SU[{h}]"), dispatch.e_su[h]);
        put(format!("E_fr[{h}]"), dispatch.e_fr[h]);
        put(format!("Et[{h}]"), prod.energy[h] - dispatch.e_eu[h] - dispatch.e_lu[h]);
        soc += -e.discharge_eff * dispatch.e_eu[h] + e.charge_eff * dispatch.e_su[h];
        put(format!("S[{}]", h + 1), soc);
    }
    v
}
