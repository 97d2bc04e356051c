//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::model::{OptModel, OptSolution, Sense, SolveStatus, VarKind};
use super::simplex::solve_relaxation;
use super::{KernelError, MilpOptions};

struct Node {
    /// Bound in minimization form.
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then lowest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub(crate) fn branch_and_bound(
    model: &OptModel,
    opts: &MilpOptions,
) -> Result<OptSolution, KernelError> {
    let n = model.num_vars();
    let sign = match model.objective.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let base_lo: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let base_hi: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let tol = &opts.tolerances;

    let mut nodes = 0usize;
    let mut next_id = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();

    let mut lo = base_lo.clone();
    let mut hi = base_hi.clone();

    // Solves one node; returns Some(node) when it still needs branching.
    let mut evaluate = |fixings: Vec<(usize, f64)>,
                        nodes: &mut usize,
                        next_id: &mut usize,
                        incumbent: &mut Option<(f64, Vec<f64>)>|
     -> Result<Option<Node>, KernelError> {
        if *nodes >= opts.node_limit {
            return Err(KernelError::NodeLimitExceeded(opts.node_limit));
        }
        *nodes += 1;
        lo.copy_from_slice(&base_lo);
        hi.copy_from_slice(&base_hi);
        for &(j, v) in &fixings {
            lo[j] = v;
            hi[j] = v;
        }
        let out = solve_relaxation(model, &lo, &hi, tol)?;
        match out.status {
            SolveStatus::Infeasible => return Ok(None),
            SolveStatus::Unbounded => {
                return Err(KernelError::UnboundedRelaxation);
            }
            SolveStatus::Optimal => {}
        }
        let bound = sign * out.objective;
        if let Some((inc, _)) = incumbent {
            if bound >= *inc - prune_gap(*inc) {
                return Ok(None);
            }
        }
        let fractional = binaries
            .iter()
            .any(|&j| (out.x[j] - out.x[j].round()).abs() > tol.integrality);
        if !fractional {
            let mut x = out.x;
            for &j in &binaries {
                x[j] = x[j].round();
            }
            *incumbent = Some((bound, x));
            return Ok(None);
        }
        let id = *next_id;
        *next_id += 1;
        Ok(Some(Node { bound, id, fixings, x: out.x }))
    };

    match evaluate(Vec::new(), &mut nodes, &mut next_id, &mut incumbent) {
        Ok(Some(root)) => heap.push(root),
        Ok(None) => {}
        Err(KernelError::UnboundedRelaxation) => {
            return Ok(OptSolution::unbounded(n, model.objective.sense, 1));
        }
        Err(e) => return Err(e),
    }
    if nodes == 1 && incumbent.is_none() && heap.is_empty() {
        return Ok(OptSolution::infeasible(n, nodes));
    }

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= *inc - prune_gap(*inc) {
                break;
            }
        }
        let j = binaries
            .iter()
            .copied()
            .find(|&j| (node.x[j] - node.x[j].round()).abs() > tol.integrality)
            .expect("queued nodes are fractional");
        for v in [0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((j, v));
            if let Some(child) = evaluate(fixings, &mut nodes, &mut next_id, &mut incumbent)
                .map_err(|e| match e {
                    KernelError::UnboundedRelaxation => {
                        KernelError::NumericalFailure("unbounded child relaxation".into())
                    }
                    e => e,
                })?
            {
                heap.push(child);
            }
        }
    }

    match incumbent {
        Some((bound, values)) => Ok(OptSolution {
            status: SolveStatus::Optimal,
            objective_value: sign * bound,
            values,
            dual_values: Vec::new(),
            nodes,
        }),
        None => Ok(OptSolution::infeasible(n, nodes)),
    }
}

fn prune_gap(incumbent: f64) -> f64 {
    1e-9 * incumbent.abs().max(1.0)
}
