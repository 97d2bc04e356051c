//! Vertex enumeration for small bounded polytopes `{u : a_i . u <= b_i}`.
//!
//! Walks the vertex-edge graph: at each vertex every edge is the line cut
//! out by a rank-(d-1) subset of the tight constraints, and a ratio test
//! along a feasible edge direction lands on the neighbouring vertex. The
//! graph of a bounded polytope is connected, so a breadth-first walk from
//! one vertex reaches all of them.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::model::{LinExpr, OptModel, Relation, Sense, SolveStatus};
use super::{solve_lp, KernelError};

const TIGHT_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub dim: usize,
    pub halfspaces: Vec<Halfspace>,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Self { dim, halfspaces: Vec::new() }
    }

    /// Axis-aligned box `lo <= u <= hi`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let mut p = Self::new(lo.len());
        for i in 0..lo.len() {
            p.add_upper(i, hi[i]);
            p.add_lower(i, lo[i]);
        }
        p
    }

    pub fn add(&mut self, normal: Vec<f64>, offset: f64) -> &mut Self {
        assert_eq!(normal.len(), self.dim);
        self.halfspaces.push(Halfspace { normal, offset });
        self
    }

    pub fn add_upper(&mut self, axis: usize, value: f64) -> &mut Self {
        let mut n = vec![0.0; self.dim];
        n[axis] = 1.0;
        self.add(n, value)
    }

    pub fn add_lower(&mut self, axis: usize, value: f64) -> &mut Self {
        let mut n = vec![0.0; self.dim];
        n[axis] = -1.0;
        self.add(n, -value)
    }

    /// `normal . u = offset`, stored as two halfspaces.
    pub fn add_equality(&mut self, normal: Vec<f64>, offset: f64) -> &mut Self {
        let neg: Vec<f64> = normal.iter().map(|v| -v).collect();
        self.add(normal, offset);
        self.add(neg, -offset)
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| dot(&h.normal, u) <= h.offset + tol)
    }

    fn as_model(&self) -> (OptModel, Vec<super::VarId>) {
        let mut m = OptModel::new(Sense::Minimize);
        let vars: Vec<_> = (0..self.dim).map(|i| m.add_free(format!("u{i}"))).collect();
        for (k, h) in self.halfspaces.iter().enumerate() {
            let mut e = LinExpr::new();
            for (i, &a) in h.normal.iter().enumerate() {
                e.add_term(vars[i], a);
            }
            m.add_constraint(format!("h{k}"), e, Relation::Le, h.offset);
        }
        (m, vars)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-reduces `rows` (each of length `dim`) and returns (rank, nullspace basis).
pub(crate) fn nullspace(rows: &[&[f64]], dim: usize) -> (usize, Vec<Vec<f64>>) {
    let mut a: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..dim {
        if r == a.len() {
            break;
        }
        let (best, mag) = (r..a.len())
            .map(|i| (i, a[i][c].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= 1e-10 {
            continue;
        }
        a.swap(r, best);
        let p = a[r][c];
        for v in a[r].iter_mut() {
            *v /= p;
        }
        for i in 0..a.len() {
            if i != r {
                let f = a[i][c];
                if f != 0.0 {
                    for k in 0..dim {
                        a[i][k] -= f * a[r][k];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let rank = pivots.len();
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![0.0; dim];
            v[f] = 1.0;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f];
            }
            v
        })
        .collect();
    (rank, basis)
}

fn combinations(items: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut f);
}

fn tight_set(p: &Polytope, v: &[f64]) -> Vec<usize> {
    p.halfspaces
        .iter()
        .enumerate()
        .filter(|(_, h)| (dot(&h.normal, v) - h.offset).abs() <= TIGHT_TOL * (1.0 + h.offset.abs()))
        .map(|(i, _)| i)
        .collect()
}

/// Longest feasible step from `v` along `dir`; `None` means unbounded.
fn ratio(p: &Polytope, v: &[f64], dir: &[f64], skip: &[usize]) -> Option<f64> {
    let mut best = f64::INFINITY;
    for (i, h) in p.halfspaces.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        let rate = dot(&h.normal, dir);
        if rate > 1e-12 {
            let slack = (h.offset - dot(&h.normal, v)).max(0.0);
            best = best.min(slack / rate);
        }
    }
    best.is_finite().then_some(best)
}

fn push_unique(list: &mut Vec<Vec<f64>>, v: Vec<f64>) -> bool {
    if list
        .iter()
        .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= DEDUP_TOL))
    {
        false
    } else {
        list.push(v);
        true
    }
}

/// Moves a feasible point onto a vertex by stepping inside the nullspace of its tight set.
fn purify(p: &Polytope, mut v: Vec<f64>) -> Result<Vec<f64>, KernelError> {
    loop {
        let tight = tight_set(p, &v);
        let rows: Vec<&[f64]> = tight.iter().map(|&i| p.halfspaces[i].normal.as_slice()).collect();
        let (rank, ns) = nullspace(&rows, p.dim);
        if rank == p.dim {
            return Ok(v);
        }
        let dir = &ns[0];
        let step = match ratio(p, &v, dir, &tight) {
            Some(t) => (t, 1.0),
            None => match ratio(p, &v, &dir.iter().map(|x| -x).collect::<Vec<_>>(), &tight) {
                Some(t) => (t, -1.0),
                None => return Err(KernelError::UnboundedSet),
            },
        };
        for (x, d) in v.iter_mut().zip(dir) {
            *x += step.1 * step.0 * d;
        }
    }
}

/// All vertices of a bounded polytope, deduplicated to 1e-8.
///
/// Returns `UnboundedSet` if the polytope is unbounded and an empty list if it
/// is empty. Intended for small dimensions (at most 8).
pub fn enumerate_extreme_points(p: &Polytope) -> Result<Vec<Vec<f64>>, KernelError> {
    let (mut model, vars) = p.as_model();
    // boundedness: every coordinate must be bounded above and below
    let mut start: Option<Vec<f64>> = None;
    for i in 0..p.dim {
        for sense in [Sense::Maximize, Sense::Minimize] {
            model.set_objective(sense, LinExpr::var(vars[i]));
            let sol = solve_lp(&model)?;
            match sol.status {
                SolveStatus::Infeasible => return Ok(Vec::new()),
                SolveStatus::Unbounded => return Err(KernelError::UnboundedSet),
                SolveStatus::Optimal => {
                    if start.is_none() {
                        start = Some(sol.values.clone());
                    }
                }
            }
        }
    }
    let start = match start {
        Some(s) => s,
        None => {
            // zero-dimensional space: the single point, if feasible
            return Ok(if p.contains(&[], 1e-9) { vec![Vec::new()] } else { Vec::new() });
        }
    };
    let v0 = purify(p, start)?;

    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut queue = VecDeque::new();
    push_unique(&mut found, v0.clone());
    queue.push_back(v0);
    while let Some(v) = queue.pop_front() {
        let tight = tight_set(p, &v);
        let mut edges: Vec<Vec<f64>> = Vec::new();
        combinations(&tight, p.dim - 1, |subset| {
            let rows: Vec<&[f64]> = subset.iter().map(|&i| p.halfspaces[i].normal.as_slice()).collect();
            let (rank, ns) = nullspace(&rows, p.dim);
            if rank + 1 != p.dim || ns.len() != 1 {
                return;
            }
            for s in [1.0, -1.0] {
                let dir: Vec<f64> = ns[0].iter().map(|x| s * x).collect();
                let feasible = tight
                    .iter()
                    .all(|&i| dot(&p.halfspaces[i].normal, &dir) <= 1e-9);
                if feasible {
                    edges.push(dir);
                }
            }
        });
        for dir in edges {
            let Some(t) = ratio(p, &v, &dir, &tight) else {
                return Err(KernelError::UnboundedSet);
            };
            if t <= 1e-12 {
                continue;
            }
            let w: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            if push_unique(&mut found, w.clone()) {
                queue.push_back(w);
            }
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found)
}
