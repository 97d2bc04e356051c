//! Imprecise Dirichlet model over line-combination states.

use serde::{Deserialize, Serialize};

use crate::factory::OptionRef;
use crate::optkernel::{LinExpr, OptModel, Relation, VarId};

use super::special::inv_reg_inc_beta;
use super::DduError;

/// A line-combination state: active in an hour when every member runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineState {
    pub id: String,
    pub members: Vec<OptionRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductStructureIdm {
    pub states: Vec<LineState>,
    /// By-product to main-product ratio per state.
    pub ratios: Vec<f64>,
    /// Historical counts per `[hour][state]`.
    pub hist_counts: Vec<Vec<u64>>,
    /// Real-time counts per `[hour][state]`, taken from the current schedule.
    pub rt_counts: Vec<Vec<u64>>,
    /// Equivalent sample size.
    pub s: f64,
    /// Confidence level of the bands.
    pub gamma: f64,
    pub priors: Vec<f64>,
    /// States with ratio at or below this value do not contribute to zeta.
    #[serde(default)]
    pub ratio_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaInterval {
    pub lo: f64,
    pub hi: f64,
    /// Expectation interval `[n/(s+N), (n+s)/(s+N)]`.
    pub expect_lo: f64,
    pub expect_hi: f64,
    /// Posterior mean `(s r + n) / (s + N)`.
    pub posterior_mean: f64,
}

impl ThetaInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Confidence band for one state's probability from raw counts.
///
/// `H` is the CDF of Beta(n, s+N-n) and `G` the CDF of Beta(n+s, N-n);
/// `lo = H^-1((1-gamma)/2)` unless n = 0, `hi = G^-1((1+gamma)/2)` unless n = N.
pub fn theta_band(n: f64, total: f64, s: f64, gamma: f64, prior: f64) -> Result<ThetaInterval, DduError> {
    if n < 0.0 || total < n || s <= 0.0 || !(0.0..1.0).contains(&gamma) {
        return Err(DduError::Domain(format!("idm band n={n} N={total} s={s} gamma={gamma}")));
    }
    let lo = if n == 0.0 { 0.0 } else { inv_reg_inc_beta(n, s + total - n, 0.5 * (1.0 - gamma))? };
    let hi = if n == total { 1.0 } else { inv_reg_inc_beta(n + s, total - n, 0.5 * (1.0 + gamma))? };
    Ok(ThetaInterval {
        lo,
        hi,
        expect_lo: n / (s + total),
        expect_hi: (n + s) / (s + total),
        posterior_mean: (s * prior + n) / (s + total),
    })
}

impl ProductStructureIdm {
    pub fn horizon(&self) -> usize {
        self.hist_counts.len()
    }

    pub fn validate(&self) -> Result<(), DduError> {
        let k = self.states.len();
        if self.ratios.len() != k || self.priors.len() != k {
            return Err(DduError::Invalid("ratios and priors need one entry per state".into()));
        }
        if self.hist_counts.iter().chain(&self.rt_counts).any(|row| row.len() != k) {
            return Err(DduError::Invalid("counts need one entry per state".into()));
        }
        if self.rt_counts.len() != self.hist_counts.len() {
            return Err(DduError::Invalid("rt_counts and hist_counts cover different horizons".into()));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(DduError::Invalid(format!("ratio {r} outside [0, 1]")));
        }
        if self.priors.iter().any(|r| !(0.0..=1.0).contains(r)) || (self.priors.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(DduError::Invalid("priors must lie in [0, 1] and sum to 1".into()));
        }
        if self.s <= 0.0 || !(0.0..1.0).contains(&self.gamma) {
            return Err(DduError::Invalid("need s > 0 and gamma in [0, 1)".into()));
        }
        for (a, sa) in self.states.iter().enumerate() {
            if sa.members.is_empty() {
                return Err(DduError::Invalid(format!("state {} has no members", sa.id)));
            }
            for sb in &self.states[a + 1..] {
                let exclusive = sa.members.iter().any(|x| {
                    sb.members.iter().any(|y| x.workshop == y.workshop && x.option != y.option)
                });
                if !exclusive {
                    return Err(DduError::Invalid(format!("states {} and {} can be active together", sa.id, sb.id)));
                }
            }
        }
        Ok(())
    }

    /// `n_i^h = n_HD + n_RT` and `N^h`.
    pub fn counts(&self, hour: usize, state: usize) -> (f64, f64) {
        let n = |i: usize| (self.hist_counts[hour][i] + self.rt_counts[hour][i]) as f64;
        (n(state), (0..self.states.len()).map(n).sum())
    }

    /// Whether state `i` contributes to zeta.
    pub fn is_byproduct_state(&self, i: usize) -> bool {
        self.ratios[i] > self.ratio_threshold
    }

    /// Band of state `i` at `hour` when the schedule adds `extra` real-time
    /// observations of `active` on top of the stored counts.
    pub fn interval_with(&self, hour: usize, i: usize, active: Option<usize>, extra: u64) -> Result<ThetaInterval, DduError> {
        let (mut n, mut total) = self.counts(hour, i);
        if let Some(a) = active {
            total += extra as f64;
            if a == i {
                n += extra as f64;
            }
        }
        theta_band(n, total, self.s, self.gamma, self.priors[i])
    }

    /// Index of the state active for a given predicate on running options.
    pub fn active_state(&self, running: impl Fn(OptionRef) -> bool) -> Option<usize> {
        self.states.iter().position(|st| st.members.iter().all(|&m| running(m)))
    }

    /// Replaces the real-time counts with the occurrences of each state in a
    /// schedule (`active[h]` is the state active at hour h, if any).
    pub fn set_rt_counts(&mut self, active: &[Option<usize>]) {
        for row in &mut self.rt_counts {
            row.iter_mut().for_each(|c| *c = 0);
        }
        for (h, a) in active.iter().enumerate() {
            if let Some(i) = a {
                self.rt_counts[h][*i] += 1;
            }
        }
    }
}

pub fn idm_interval(spec: &ProductStructureIdm, hour: usize, state: usize) -> Result<ThetaInterval, DduError> {
    let (n, total) = spec.counts(hour, state);
    theta_band(n, total, spec.s, spec.gamma, spec.priors[state])
}

/// Adds `zeta[h] = sum_i w_i theta_i` with `lo_i a_i <= theta_i <= hi_i a_i`.
///
/// `selected` pairs a state index with its activity indicator (a constant 1
/// for a fixed selection, or an AND variable). States at or below the ratio
/// threshold are skipped. Returns the zeta variable.
pub fn zeta_rows(
    model: &mut OptModel,
    spec: &ProductStructureIdm,
    hour: usize,
    selected: &[(usize, LinExpr)],
) -> Result<VarId, DduError> {
    let zeta = model.add_continuous(format!("zeta[{hour}]"), 0.0, 1.0);
    let mut def = LinExpr::var(zeta);
    for (i, ind) in selected {
        if !spec.is_byproduct_state(*i) {
            continue;
        }
        let band = idm_interval(spec, hour, *i)?;
        let theta = model.add_continuous(format!("theta[{hour}][{}]", spec.states[*i].id), 0.0, 1.0);
        let mut up = LinExpr::var(theta);
        up.add_scaled(ind, -band.hi);
        model.add_constraint(format!("theta_hi[{hour}][{i}]"), up, Relation::Le, 0.0);
        let mut dn = LinExpr::var(theta);
        dn.add_scaled(ind, -band.lo);
        model.add_constraint(format!("theta_lo[{hour}][{i}]"), dn, Relation::Ge, 0.0);
        def.add_term(theta, -spec.ratios[*i]);
    }
    model.add_constraint(format!("zeta_def[{hour}]"), def, Relation::Eq, 0.0);
    Ok(zeta)
}
