//! Desk-scale linear optimization kernel.
//!
//! Primal simplex for LPs, best-first branch-and-bound for mixed-binary
//! models, LP dualization and vertex enumeration. Everything is dense and
//! single-threaded per model; there is no global state, so distinct models
//! can be solved from different threads.

mod branch;
mod dual;
mod model;
mod simplex;
mod vertices;

use thiserror::Error;

pub use dual::dualize_lp;
pub use model::{
    Constraint, LinExpr, Objective, OptModel, OptSolution, Relation, Sense, SolveStatus, VarId,
    VarKind, Variable,
};
pub use vertices::{enumerate_extreme_points, Halfspace, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("branch-and-bound node limit {0} exceeded")]
    NodeLimitExceeded(usize),
    #[error("model has binary variables; use solve_milp")]
    NotLinear,
    #[error("polytope is unbounded")]
    UnboundedSet,
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("duplicate variable: {0}")]
    DuplicateVariable(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("LP relaxation is unbounded")]
    UnboundedRelaxation,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    pub integrality: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feasibility: 1e-7, optimality: 1e-7, integrality: 1e-6, pivot: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    pub tolerances: Tolerances,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { node_limit: 200_000, tolerances: Tolerances::default() }
    }
}

/// Solves a model without binary variables.
pub fn solve_lp(model: &OptModel) -> Result<OptSolution, KernelError> {
    solve_lp_with(model, &Tolerances::default())
}

pub fn solve_lp_with(model: &OptModel, tol: &Tolerances) -> Result<OptSolution, KernelError> {
    if model.has_binaries() {
        return Err(KernelError::NotLinear);
    }
    model.validate()?;
    let lo: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let out = simplex::solve_relaxation(model, &lo, &hi, tol)?;
    Ok(simplex::outcome_to_solution(model, out))
}

/// Structural columns basic at the LP optimum (empty unless optimal).
pub fn lp_basis(model: &OptModel) -> Result<Vec<VarId>, KernelError> {
    let lo: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let out = simplex::solve_relaxation(model, &lo, &hi, &Tolerances::default())?;
    Ok(out.basic_structurals.into_iter().map(VarId).collect())
}

/// Solves a mixed-binary model exactly by branch-and-bound.
pub fn solve_milp(model: &OptModel) -> Result<OptSolution, KernelError> {
    solve_milp_with(model, &MilpOptions::default())
}

pub fn solve_milp_with(model: &OptModel, opts: &MilpOptions) -> Result<OptSolution, KernelError> {
    model.validate()?;
    if !model.has_binaries() {
        return solve_lp_with(model, &opts.tolerances);
    }
    branch::branch_and_bound(model, opts)
}
