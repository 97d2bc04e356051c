//! Dense bounded-variable primal simplex.
//!
//! Every row gets a slack column (`a x + s = b`) whose bounds encode the
//! relation, so the model becomes `A x = b, l <= x <= u`. Nonbasic columns sit
//! at one of their bounds (free columns at zero). Rows whose slack cannot
//! absorb the initial residual get an artificial column and phase 1 drives
//! those to zero. Dual values are read off the slack reduced costs.

use super::model::{OptModel, OptSolution, Relation, Sense, SolveStatus};
use super::{KernelError, Tolerances};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const BLAND_THRESHOLD: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: SolveStatus,
    /// Structural values (model order).
    pub x: Vec<f64>,
    /// Objective in the model's own sense, constant included.
    pub objective: f64,
    /// One dual per model constraint, in the model's own sense.
    pub duals: Vec<f64>,
    /// Structural columns that are basic at the optimum.
    pub basic_structurals: Vec<usize>,
    pub pivots: usize,
}

struct Tableau {
    m: usize,
    ncols: usize,
    n_struct: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    d: Vec<f64>,
    blocked: Vec<bool>,
    pivots: usize,
    pivot_limit: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.ncols + c]
    }

    fn compute_reduced_costs(&mut self, cost: &[f64]) {
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
            for (dj, &a) in d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        for r in 0..self.m {
            d[self.basis[r]] = 0.0;
        }
        self.d = d;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let nc = self.ncols;
        let piv = self.t[pr * nc + pc];
        {
            let row = &mut self.t[pr * nc..(pr + 1) * nc];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[pc] = 1.0;
        }
        self.beta[pr] /= piv;
        let (before, rest) = self.t.split_at_mut(pr * nc);
        let (prow, after) = rest.split_at_mut(nc);
        let prow: &[f64] = prow;
        let bpr = self.beta[pr];
        for (r, row) in before.chunks_mut(nc).enumerate() {
            let f = row[pc];
            if f != 0.0 {
                for (a, &p) in row.iter_mut().zip(prow) {
                    *a -= f * p;
                }
                row[pc] = 0.0;
                self.beta[r] -= f * bpr;
            }
        }
        for (k, row) in after.chunks_mut(nc).enumerate() {
            let f = row[pc];
            if f != 0.0 {
                for (a, &p) in row.iter_mut().zip(prow) {
                    *a -= f * p;
                }
                row[pc] = 0.0;
                self.beta[pr + 1 + k] -= f * bpr;
            }
        }
        let f = self.d[pc];
        if f != 0.0 {
            for (dj, &p) in self.d.iter_mut().zip(prow) {
                *dj -= f * p;
            }
            self.d[pc] = 0.0;
        }
        let leaving = self.basis[pr];
        self.is_basic[leaving] = false;
        self.is_basic[pc] = true;
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Recomputes basic values from `beta` and the nonbasic values.
    fn refresh_basic_values(&mut self) {
        for r in 0..self.m {
            let mut v = self.beta[r];
            let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 && !self.is_basic[j] {
                    v -= a * self.x[j];
                }
            }
            self.x[self.basis[r]] = v;
        }
    }

    fn run(&mut self, tol: &Tolerances) -> Result<Step, KernelError> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > self.pivot_limit {
                return Err(KernelError::NumericalFailure(format!(
                    "pivot limit {} exceeded",
                    self.pivot_limit
                )));
            }
            // entering column
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                if self.is_basic[j] || self.blocked[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let dj = self.d[j];
                let can_up = self.x[j] < self.hi[j];
                let can_down = self.x[j] > self.lo[j];
                let (dir, score) = if dj < -tol.optimality && can_up {
                    (1.0, -dj)
                } else if dj > tol.optimality && can_down {
                    (-1.0, dj)
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some((j, dir));
                }
            }
            let Some((j, dir)) = enter else {
                return Ok(Step::Optimal);
            };

            // ratio test
            let mut t_star = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None; // (row, goes_to_upper)
            let mut leave_mag = 0.0;
            let flip = self.hi[j] - self.lo[j];
            for r in 0..self.m {
                let a = self.at(r, j);
                if a.abs() <= tol.pivot {
                    continue;
                }
                let b = self.basis[r];
                let delta = -dir * a;
                let (limit, to_upper) = if delta < 0.0 {
                    if self.lo[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((self.x[b] - self.lo[b]) / -delta).max(0.0), false)
                } else {
                    if self.hi[b] == f64::INFINITY {
                        continue;
                    }
                    (((self.hi[b] - self.x[b]) / delta).max(0.0), true)
                };
                let better = match leave {
                    None => true,
                    Some((lr, _)) => {
                        if limit < t_star - 1e-12 {
                            true
                        } else if limit <= t_star + 1e-12 {
                            if bland {
                                b < self.basis[lr]
                            } else {
                                a.abs() > leave_mag
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    t_star = limit;
                    leave = Some((r, to_upper));
                    leave_mag = a.abs();
                }
            }
            if flip.is_finite() && flip <= t_star {
                // bound flip, no basis change
                let step = dir * flip;
                self.x[j] += step;
                for r in 0..self.m {
                    let a = self.at(r, j);
                    if a != 0.0 {
                        let b = self.basis[r];
                        self.x[b] -= a * step;
                    }
                }
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                degenerate_run = 0;
                self.pivots += 1;
                continue;
            }
            let Some((pr, to_upper)) = leave else {
                return Ok(Step::Unbounded);
            };
            let step = dir * t_star;
            if t_star > 0.0 {
                for r in 0..self.m {
                    let a = self.at(r, j);
                    if a != 0.0 {
                        let b = self.basis[r];
                        self.x[b] -= a * step;
                    }
                }
                self.x[j] += step;
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
                if degenerate_run > BLAND_THRESHOLD {
                    bland = true;
                }
            }
            let leaving = self.basis[pr];
            self.x[leaving] = if to_upper { self.hi[leaving] } else { self.lo[leaving] };
            self.pivot(pr, j);
        }
    }
}

/// Solves the LP relaxation of `model` with per-variable bound overrides.
pub(crate) fn solve_relaxation(
    model: &OptModel,
    lower: &[f64],
    upper: &[f64],
    tol: &Tolerances,
) -> Result<LpOutcome, KernelError> {
    let n = model.num_vars();
    let sense_sign = match model.objective.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for j in 0..n {
        if lower[j] > upper[j] + tol.feasibility {
            return Ok(infeasible_outcome(model));
        }
    }

    // drop empty rows after checking them
    let mut rows: Vec<usize> = Vec::with_capacity(model.constraints.len());
    for (i, c) in model.constraints.iter().enumerate() {
        if c.expr.terms.is_empty() {
            if !c.relation.holds(0.0, c.rhs, tol.feasibility) {
                return Ok(infeasible_outcome(model));
            }
        } else {
            rows.push(i);
        }
    }
    let m = rows.len();

    let mut x0 = vec![0.0; n];
    for j in 0..n {
        x0[j] = if lower[j].is_finite() {
            lower[j]
        } else if upper[j].is_finite() {
            upper[j]
        } else {
            0.0
        };
    }

    // residuals and which rows need artificials
    let mut residual = vec![0.0; m];
    let mut slack_lo = vec![0.0; m];
    let mut slack_hi = vec![0.0; m];
    let mut needs_art = vec![false; m];
    for (k, &i) in rows.iter().enumerate() {
        let c = &model.constraints[i];
        let act: f64 = c.expr.terms.iter().map(|&(v, a)| a * x0[v.0]).sum();
        let r = c.rhs - act;
        residual[k] = r;
        let (sl, sh) = match c.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        slack_lo[k] = sl;
        slack_hi[k] = sh;
        needs_art[k] = r < sl - tol.feasibility || r > sh + tol.feasibility;
    }
    let art_rows: Vec<usize> = (0..m).filter(|&k| needs_art[k]).collect();
    let na = art_rows.len();
    let ncols = n + m + na;

    let mut t = vec![0.0; m * ncols];
    let mut beta = vec![0.0; m];
    let mut basis = vec![0usize; m];
    let mut x = vec![0.0; ncols];
    let mut lo = vec![0.0; ncols];
    let mut hi = vec![0.0; ncols];
    x[..n].copy_from_slice(&x0);
    lo[..n].copy_from_slice(lower);
    hi[..n].copy_from_slice(upper);
    let mut art_col_of_row = vec![usize::MAX; m];
    for (a, &k) in art_rows.iter().enumerate() {
        art_col_of_row[k] = n + m + a;
    }
    for (k, &i) in rows.iter().enumerate() {
        let c = &model.constraints[i];
        let row = &mut t[k * ncols..(k + 1) * ncols];
        for &(v, a) in &c.expr.terms {
            row[v.0] += a;
        }
        row[n + k] = 1.0;
        lo[n + k] = slack_lo[k];
        hi[n + k] = slack_hi[k];
        beta[k] = c.rhs;
        if needs_art[k] {
            let sigma = if residual[k] >= 0.0 { 1.0 } else { -1.0 };
            let ac = art_col_of_row[k];
            row[ac] = sigma;
            if sigma < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                beta[k] = -beta[k];
            }
            basis[k] = ac;
            lo[ac] = 0.0;
            hi[ac] = f64::INFINITY;
            x[ac] = residual[k].abs();
            x[n + k] = 0.0;
        } else {
            basis[k] = n + k;
            x[n + k] = residual[k];
        }
    }
    let mut is_basic = vec![false; ncols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let pivot_limit = 50 * (m + ncols) + 1000;
    let mut tab = Tableau {
        m,
        ncols,
        n_struct: n,
        t,
        beta,
        basis,
        is_basic,
        x,
        lo,
        hi,
        d: vec![0.0; ncols],
        blocked: vec![false; ncols],
        pivots: 0,
        pivot_limit,
    };

    if na > 0 {
        let mut cost1 = vec![0.0; ncols];
        for c in cost1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        tab.compute_reduced_costs(&cost1);
        match tab.run(tol)? {
            Step::Optimal => {}
            Step::Unbounded => {
                return Err(KernelError::NumericalFailure("phase 1 reported unbounded".into()))
            }
        }
        tab.refresh_basic_values();
        let infeas: f64 = (n + m..ncols).map(|j| tab.x[j]).sum();
        let scale = 1.0 + tab.beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > tol.feasibility * scale {
            return Ok(LpOutcome { pivots: tab.pivots, ..infeasible_outcome(model) });
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            let b = tab.basis[r];
            if b < n + m {
                continue;
            }
            tab.x[b] = 0.0;
            let mut best: Option<usize> = None;
            let mut mag = tol.pivot.max(1e-7);
            for j in 0..n + m {
                if tab.is_basic[j] {
                    continue;
                }
                let a = tab.at(r, j).abs();
                if a > mag {
                    mag = a;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                tab.pivot(r, j);
            }
        }
        for j in n + m..ncols {
            tab.lo[j] = 0.0;
            tab.hi[j] = 0.0;
            tab.blocked[j] = true;
            if !tab.is_basic[j] {
                tab.x[j] = 0.0;
            }
        }
        tab.refresh_basic_values();
    }

    let mut cost2 = vec![0.0; ncols];
    for &(v, c) in &model.objective.expr.terms {
        cost2[v.0] += sense_sign * c;
    }
    tab.compute_reduced_costs(&cost2);
    let step = tab.run(tol)?;
    tab.refresh_basic_values();
    if let Step::Unbounded = step {
        return Ok(LpOutcome {
            status: SolveStatus::Unbounded,
            x: vec![0.0; n],
            objective: -sense_sign * f64::INFINITY,
            duals: Vec::new(),
            basic_structurals: Vec::new(),
            pivots: tab.pivots,
        });
    }

    let mut xs: Vec<f64> = tab.x[..n].to_vec();
    for j in 0..n {
        // clamp tiny bound violations left by floating point
        if xs[j] < lower[j] && xs[j] > lower[j] - tol.feasibility {
            xs[j] = lower[j];
        }
        if xs[j] > upper[j] && xs[j] < upper[j] + tol.feasibility {
            xs[j] = upper[j];
        }
    }
    let objective = model.objective.expr.eval(&xs);
    let mut duals = vec![0.0; model.constraints.len()];
    for (k, &i) in rows.iter().enumerate() {
        duals[i] = -sense_sign * tab.d[n + k];
    }
    let basic_structurals = tab
        .basis
        .iter()
        .copied()
        .filter(|&b| b < tab.n_struct)
        .collect();
    Ok(LpOutcome {
        status: SolveStatus::Optimal,
        x: xs,
        objective,
        duals,
        basic_structurals,
        pivots: tab.pivots,
    })
}

fn infeasible_outcome(model: &OptModel) -> LpOutcome {
    LpOutcome {
        status: SolveStatus::Infeasible,
        x: vec![0.0; model.num_vars()],
        objective: f64::NAN,
        duals: Vec::new(),
        basic_structurals: Vec::new(),
        pivots: 0,
    }
}

pub(crate) fn outcome_to_solution(model: &OptModel, out: LpOutcome) -> OptSolution {
    log::trace!("lp finished after {} pivots: {:?}", out.pivots, out.status);
    match out.status {
        SolveStatus::Optimal => OptSolution {
            status: SolveStatus::Optimal,
            values: out.x,
            objective_value: out.objective,
            dual_values: out.duals,
            nodes: 1,
        },
        SolveStatus::Infeasible => OptSolution::infeasible(model.num_vars(), 1),
        SolveStatus::Unbounded => OptSolution::unbounded(model.num_vars(), model.objective.sense, 1),
    }
}
