use super::model::{LinExpr, OptModel, Relation, Sense, VarId, VarKind};
use super::KernelError;

/// Sign restriction of a primal column after bound rows have been split off.
#[derive(Clone, Copy)]
enum ColSign {
    NonNeg,
    NonPos,
    Free,
}

/// Builds the LP dual of `model`.
///
/// Bounds other than sign restrictions are turned into explicit rows first,
/// so the dual has one variable per primal row (named `dual[<row>]`) plus one
/// per generated bound row (`dual[bound:<var>:lo|hi]`). Dual variable signs
/// and row relations follow the usual min/max correspondence, so for
/// `max c'x, Ax <= b, x >= 0` the result is `min b'y, A'y >= c, y >= 0`.
pub fn dualize_lp(model: &OptModel) -> Result<OptModel, KernelError> {
    if model.has_binaries() {
        return Err(KernelError::NotLinear);
    }
    model.validate()?;

    // Primal rows: (name, expr, relation, rhs), including extra bound rows.
    let mut rows: Vec<(String, LinExpr, Relation, f64)> = model
        .constraints
        .iter()
        .map(|c| (c.name.clone(), c.expr.clone(), c.relation, c.rhs))
        .collect();
    let mut signs = Vec::with_capacity(model.num_vars());
    for (j, v) in model.variables.iter().enumerate() {
        debug_assert_eq!(v.kind, VarKind::Continuous);
        let id = VarId(j);
        let sign = if v.lower == 0.0 {
            ColSign::NonNeg
        } else if v.lower == f64::NEG_INFINITY && v.upper == 0.0 {
            ColSign::NonPos
        } else {
            ColSign::Free
        };
        match sign {
            ColSign::NonNeg => {
                if v.upper.is_finite() {
                    rows.push((format!("bound:{}:hi", v.name), LinExpr::var(id), Relation::Le, v.upper));
                }
            }
            ColSign::NonPos => {}
            ColSign::Free => {
                if v.lower.is_finite() {
                    rows.push((format!("bound:{}:lo", v.name), LinExpr::var(id), Relation::Ge, v.lower));
                }
                if v.upper.is_finite() {
                    rows.push((format!("bound:{}:hi", v.name), LinExpr::var(id), Relation::Le, v.upper));
                }
            }
        }
        signs.push(sign);
    }

    let primal_min = model.objective.sense == Sense::Minimize;
    let mut dual = OptModel::new(if primal_min { Sense::Maximize } else { Sense::Minimize });
    let mut dual_vars = Vec::with_capacity(rows.len());
    for (name, _, rel, _) in &rows {
        // min primal: >= row -> y >= 0, <= row -> y <= 0; max primal flips.
        let (lo, hi) = match (rel, primal_min) {
            (Relation::Eq, _) => (f64::NEG_INFINITY, f64::INFINITY),
            (Relation::Ge, true) | (Relation::Le, false) => (0.0, f64::INFINITY),
            (Relation::Le, true) | (Relation::Ge, false) => (f64::NEG_INFINITY, 0.0),
        };
        dual_vars.push(dual.add_continuous(format!("dual[{name}]"), lo, hi));
    }

    // column j of the primal becomes dual row j
    let mut columns: Vec<LinExpr> = vec![LinExpr::new(); model.num_vars()];
    for (k, (_, expr, _, _)) in rows.iter().enumerate() {
        for &(v, a) in &expr.normalized().terms {
            columns[v.0].add_term(dual_vars[k], a);
        }
    }
    let mut cost = vec![0.0; model.num_vars()];
    for &(v, c) in &model.objective.expr.terms {
        cost[v.0] += c;
    }
    for (j, col) in columns.into_iter().enumerate() {
        let rel = match (signs[j], primal_min) {
            (ColSign::Free, _) => Relation::Eq,
            (ColSign::NonNeg, true) | (ColSign::NonPos, false) => Relation::Le,
            (ColSign::NonNeg, false) | (ColSign::NonPos, true) => Relation::Ge,
        };
        dual.add_constraint(format!("col[{}]", model.variables[j].name), col, rel, cost[j]);
    }
    let mut obj = LinExpr::constant(model.objective.expr.constant);
    for (k, (_, _, _, rhs)) in rows.iter().enumerate() {
        obj.add_term(dual_vars[k], *rhs);
    }
    dual.set_objective(dual.objective.sense, obj);
    Ok(dual)
}
