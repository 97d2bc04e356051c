use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::KernelError;

/// Index of a variable inside an [`OptModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    /// Whether `lhs rel rhs` holds within `tol`.
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        Self { terms: vec![(v, coef)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        if scale == 0.0 {
            return self;
        }
        for &(v, c) in &other.terms {
            self.terms.push((v, c * scale));
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_scaled(self, scale);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    /// Merge duplicate variables and drop zero coefficients; terms end up sorted by index.
    pub fn normalized(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LinExpr { terms: merged, constant: self.constant }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Left-hand side; any constant part is moved to the right-hand side on insertion.
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.expr.eval(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: Sense,
    pub expr: LinExpr,
}

/// A linear model over continuous and binary variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
    #[serde(skip)]
    index: HashMap<String, VarId>,
}

impl Default for OptModel {
    fn default() -> Self {
        Self::new(Sense::Minimize)
    }
}

impl OptModel {
    pub fn new(sense: Sense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective { sense, expr: LinExpr::new() },
            index: HashMap::new(),
        }
    }

    /// Rebuild the name index (needed after deserialization).
    pub fn reindex(&mut self) -> Result<(), KernelError> {
        self.index.clear();
        for (i, v) in self.variables.iter().enumerate() {
            if self.index.insert(v.name.clone(), VarId(i)).is_some() {
                return Err(KernelError::DuplicateVariable(v.name.clone()));
            }
        }
        Ok(())
    }

    fn push_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> VarId {
        assert!(
            !self.index.contains_key(&name),
            "duplicate variable name {name}"
        );
        let id = VarId(self.variables.len());
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, kind, lower, upper });
        id
    }

    /// Continuous variable with explicit bounds (use infinities for open sides).
    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.push_var(name.into(), VarKind::Continuous, lower, upper)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_continuous(name, 0.0, f64::INFINITY)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn has_binaries(&self) -> bool {
        self.variables.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Adds `expr rel rhs`. The expression's constant is folded into the right-hand side.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let expr = expr.normalized();
        let rhs = rhs - expr.constant;
        let expr = LinExpr { terms: expr.terms, constant: 0.0 };
        self.constraints.push(Constraint { name: name.into(), expr, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn add_row(&mut self, c: Constraint) -> usize {
        self.add_constraint(c.name, c.expr, c.relation, c.rhs)
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        self.objective = Objective { sense, expr: expr.normalized() };
    }

    /// Checks that every term references a declared variable and bounds are sane.
    pub fn validate(&self) -> Result<(), KernelError> {
        let n = self.variables.len();
        let check = |e: &LinExpr, ctx: &str| -> Result<(), KernelError> {
            for &(v, c) in &e.terms {
                if v.0 >= n {
                    return Err(KernelError::UnknownVariable(format!("{ctx}: index {}", v.0)));
                }
                if !c.is_finite() {
                    return Err(KernelError::InvalidModel(format!("{ctx}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        for v in &self.variables {
            if v.lower > v.upper || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(KernelError::InvalidModel(format!("bad bounds on {}", v.name)));
            }
        }
        for c in &self.constraints {
            check(&c.expr, &c.name)?;
            if !c.rhs.is_finite() {
                return Err(KernelError::InvalidModel(format!("{}: non-finite rhs", c.name)));
            }
        }
        check(&self.objective.expr, "objective")
    }

    /// Largest violation of rows and bounds at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs = c.activity(values);
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (v, x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        worst
    }

    /// Dump in CPLEX LP text format. Output depends only on the model contents.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let sanitize = |s: &str| -> String {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
                .collect()
        };
        let names: Vec<String> = self.variables.iter().map(|v| sanitize(&v.name)).collect();
        let fmt_expr = |e: &LinExpr| -> String {
            let mut s = String::new();
            for (i, &(v, c)) in e.terms.iter().enumerate() {
                let mag = c.abs();
                match (i, c < 0.0) {
                    (0, false) => write!(s, "{mag:?} {}", names[v.0]),
                    (0, true) => write!(s, "-{mag:?} {}", names[v.0]),
                    (_, false) => write!(s, " + {mag:?} {}", names[v.0]),
                    (_, true) => write!(s, " - {mag:?} {}", names[v.0]),
                }
                .expect("writing to a String");
            }
            if s.is_empty() {
                s.push_str("0 ");
                s.push_str(names.first().map(String::as_str).unwrap_or("x"));
            }
            s
        };
        let _ = writeln!(
            out,
            "{}",
            match self.objective.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        );
        let _ = writeln!(out, " obj: {}", fmt_expr(&self.objective.expr));
        let _ = writeln!(out, "Subject To");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                " c{}_{}: {} {} {:?}",
                i,
                sanitize(&c.name),
                fmt_expr(&c.expr),
                c.relation.symbol(),
                c.rhs
            );
        }
        let _ = writeln!(out, "Bounds");
        for (v, name) in self.variables.iter().zip(&names) {
            if v.kind == VarKind::Binary {
                continue;
            }
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
                (true, true) => {
                    let _ = writeln!(out, " {:?} <= {name} <= {:?}", v.lower, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {:?}", v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {name} <= {:?}", v.upper);
                }
            }
        }
        let bins: Vec<&str> = self
            .variables
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.kind == VarKind::Binary)
            .map(|(_, n)| n.as_str())
            .collect();
        if !bins.is_empty() {
            let _ = writeln!(out, "Binary");
            for b in bins {
                let _ = writeln!(out, " {b}");
            }
        }
        let _ = writeln!(out, "End");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// One entry per constraint for LP solves; empty for MILP solves.
    pub dual_values: Vec<f64>,
    /// Branch-and-bound nodes processed (1 for a pure LP).
    pub nodes: usize,
}

impl OptSolution {
    pub(crate) fn infeasible(n: usize, nodes: usize) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            values: vec![0.0; n],
            objective_value: f64::NAN,
            dual_values: Vec::new(),
            nodes,
        }
    }

    pub(crate) fn unbounded(n: usize, sense: Sense, nodes: usize) -> Self {
        Self {
            status: SolveStatus::Unbounded,
            values: vec![0.0; n],
            objective_value: match sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            dual_values: Vec::new(),
            nodes,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}
