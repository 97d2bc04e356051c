//! Yield ambiguity driven by which line combination runs.

use serde::{Deserialize, Serialize};

use crate::factory::OptionRef;
use crate::optkernel::{Constraint, LinExpr, OptModel, Relation, VarId};

use super::DduError;

/// A combination `k` of options that shifts the yield floor of `target`
/// by `-delta` when all of them (and the target) run in the same hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldCombo {
    pub target: OptionRef,
    pub members: Vec<OptionRef>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldAmbiguity {
    /// Floor per `[workshop][option]`.
    pub alpha_floor: Vec<Vec<f64>>,
    pub combos: Vec<YieldCombo>,
    /// Options whose yield is decision dependent; all others use their
    /// nominal `yield_rate`.
    pub corrected_set: Vec<OptionRef>,
}

/// Rows forcing `aux` to the product of binaries `vars`:
/// `aux <= v_i`, `aux >= sum(v) - (n - 1)`. The caller bounds `aux` to [0, 1].
pub fn and_linearize(vars: &[VarId], aux: VarId, name: &str) -> Vec<Constraint> {
    assert!(!vars.is_empty(), "and_linearize needs at least one input");
    let mut rows = Vec::with_capacity(vars.len() + 1);
    for (i, &v) in vars.iter().enumerate() {
        let mut e = LinExpr::var(aux);
        e.add_term(v, -1.0);
        rows.push(Constraint { name: format!("{name}:le{i}"), expr: e, relation: Relation::Le, rhs: 0.0 });
    }
    let mut e = LinExpr::var(aux);
    for &v in vars {
        e.add_term(v, -1.0);
    }
    rows.push(Constraint {
        name: format!("{name}:ge"),
        expr: e,
        relation: Relation::Ge,
        rhs: -(vars.len() as f64 - 1.0),
    });
    rows
}

/// Adds (or reuses) the aux variable `name` linked to the product of `vars`.
/// A single input is returned as is.
pub fn and_variable(model: &mut OptModel, vars: &[VarId], name: &str) -> VarId {
    let mut vars = vars.to_vec();
    vars.sort();
    vars.dedup();
    if vars.len() == 1 {
        return vars[0];
    }
    if let Some(v) = model.var_id(name) {
        return v;
    }
    let aux = model.add_continuous(name, 0.0, 1.0);
    for row in and_linearize(&vars, aux, name) {
        model.add_row(row);
    }
    aux
}

impl YieldAmbiguity {
    pub fn is_corrected(&self, o: OptionRef) -> bool {
        self.corrected_set.contains(&o)
    }

    pub fn floor(&self, o: OptionRef) -> f64 {
        self.alpha_floor[o.workshop][o.option]
    }

    pub fn combos_for(&self, o: OptionRef) -> impl Iterator<Item = (usize, &YieldCombo)> {
        self.combos.iter().enumerate().filter(move |(_, c)| c.target == o)
    }

    /// Members of a combo together with its target, sorted and deduplicated.
    pub fn combo_support(&self, c: usize) -> Vec<OptionRef> {
        let combo = &self.combos[c];
        let mut s = combo.members.clone();
        s.push(combo.target);
        s.sort();
        s.dedup();
        s
    }

    /// Largest floor reduction any subset of combos can cause for `o`.
    pub fn max_reduction(&self, o: OptionRef) -> f64 {
        self.combos_for(o).map(|(_, c)| c.delta.max(0.0)).sum()
    }

    /// Corrected floor `alpha_floor - d(x)` given which options run this hour.
    pub fn corrected_floor(&self, o: OptionRef, running: impl Fn(OptionRef) -> bool) -> f64 {
        let d: f64 = self
            .combos_for(o)
            .filter(|(_, c)| c.members.iter().all(|&m| running(m)))
            .map(|(_, c)| c.delta)
            .sum();
        self.floor(o) - d
    }

    pub fn validate(&self, option_counts: &[usize]) -> Result<(), DduError> {
        if self.alpha_floor.len() != option_counts.len()
            || self.alpha_floor.iter().zip(option_counts).any(|(r, &n)| r.len() != n)
        {
            return Err(DduError::Invalid("alpha_floor shape does not match the factory".into()));
        }
        let in_range = |o: &OptionRef| o.workshop < option_counts.len() && o.option < option_counts[o.workshop];
        for row in &self.alpha_floor {
            if let Some(a) = row.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                return Err(DduError::Invalid(format!("alpha floor {a} outside [0, 1]")));
            }
        }
        for (i, c) in self.combos.iter().enumerate() {
            if c.members.is_empty() {
                return Err(DduError::Invalid(format!("combo {i} has no members")));
            }
            if c.delta.abs() > 1.0 {
                return Err(DduError::Invalid(format!("combo {i}: |delta| > 1")));
            }
            if !in_range(&c.target) || !c.members.iter().all(in_range) {
                return Err(DduError::Invalid(format!("combo {i} references an unknown option")));
            }
            if c.members.iter().any(|m| m.workshop == c.target.workshop && m.option != c.target.option) {
                return Err(DduError::Invalid(format!(
                    "combo {i} pairs two options of workshop {}, which never run together",
                    c.target.workshop
                )));
            }
            if !self.is_corrected(c.target) {
                return Err(DduError::Invalid(format!("combo {i} targets an option outside the corrected set")));
            }
        }
        for &o in &self.corrected_set {
            if !in_range(&o) {
                return Err(DduError::Invalid(format!("corrected option {o} does not exist")));
            }
            let lowest = self.floor(o) - self.max_reduction(o);
            let highest = self.floor(o) - self.combos_for(o).map(|(_, c)| c.delta.min(0.0)).sum::<f64>();
            if lowest < 0.0 || highest > 1.0 {
                return Err(DduError::Invalid(format!("corrected yield of {o} can leave [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Rows tying `alpha[h][n][p]` to the hour's binaries for every corrected
/// option of `workshop`: `alpha >= floor - sum_k aux_k * delta_k`, `alpha <= 1`.
///
/// `x[n][p]` are the decision binaries of this hour. Returns the alpha
/// variables in option order.
pub fn yield_bound_rows(
    model: &mut OptModel,
    spec: &YieldAmbiguity,
    hour: usize,
    workshop: usize,
    x: &[Vec<VarId>],
) -> Vec<(usize, VarId)> {
    let mut out = Vec::new();
    for p in 0..x[workshop].len() {
        let o = OptionRef::new(workshop, p);
        if !spec.is_corrected(o) {
            continue;
        }
        let alpha = model.add_continuous(format!("alpha[{hour}][{workshop}][{p}]"), 0.0, f64::INFINITY);
        let mut e = LinExpr::var(alpha);
        for (c, combo) in spec.combos_for(o) {
            let vars: Vec<VarId> = combo.members.iter().map(|m| x[m.workshop][m.option]).collect();
            let aux = and_variable(model, &vars, &format!("and[{hour}][m{c}]"));
            e.add_term(aux, combo.delta);
        }
        model.add_constraint(format!("yield_lo[{hour}][{workshop}][{p}]"), e, Relation::Ge, spec.floor(o));
        model.add_constraint(format!("yield_hi[{hour}][{workshop}][{p}]"), LinExpr::var(alpha), Relation::Le, 1.0);
        out.push((p, alpha));
    }
    out
}

/// Linear expression for `alpha * I` of option `o` at `hour` with alpha at
/// its corrected floor: `floor * I - sum_k delta_k * AND(k, I)`.
pub fn yield_output_expr(
    model: &mut OptModel,
    spec: &YieldAmbiguity,
    hour: usize,
    o: OptionRef,
    x: &[Vec<VarId>],
    nominal: f64,
) -> LinExpr {
    let i = x[o.workshop][o.option];
    if !spec.is_corrected(o) {
        return LinExpr::term(i, nominal);
    }
    let mut e = LinExpr::term(i, spec.floor(o));
    for (c, _) in spec.combos_for(o) {
        let vars: Vec<VarId> = spec.combo_support(c).iter().map(|m| x[m.workshop][m.option]).collect();
        let aux = and_variable(model, &vars, &format!("and[{hour}][c{c}]"));
        e.add_term(aux, -spec.combos[c].delta);
    }
    e
}
