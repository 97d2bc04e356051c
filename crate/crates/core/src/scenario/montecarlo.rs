//! Out-of-sample evaluation of a fixed schedule.
//!
//! Trial `i` draws from ChaCha8 seeded with `seed` on stream `i`, so the
//! summary does not depend on how trials are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::ddccg::{DduEntry, WxValues};
use crate::ddu::{fr_delta, idm_interval, normal_quantile, DduSpec, FrMomentModel, ProductStructureIdm, YieldAmbiguity};
use crate::factory::{
    check_binaries, simulate_schedule, EnergyDispatch, FactoryGraph, OptionRef, ScheduleDecision, UncertaintyRealization,
};
use crate::optkernel::solve_lp;
use crate::parallel::{map_indexed, pairwise_sum, Parallelism};

/// Law of the load deviation around its hourly mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadLaw {
    /// Gaussian truncated at four standard deviations.
    #[default]
    TruncatedGaussian,
    /// The two-point law that is extremal for Cantelli's bound; for stress
    /// tests only.
    TwoPoint,
}

/// Which member of the moment set drives the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentPoint {
    /// Zero mean shift, the largest admissible spread.
    Center,
    /// The member that pushes the upper quantile furthest.
    #[default]
    Worst,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Samplers {
    pub fr: Option<FrMomentModel>,
    pub yields: Option<YieldAmbiguity>,
    pub idm: Option<ProductStructureIdm>,
    pub law: LoadLaw,
    pub moment: MomentPoint,
}

impl Samplers {
    pub fn from_entries(entries: &[DduEntry]) -> Self {
        let mut s = Self::default();
        for e in entries {
            match &e.spec {
                DduSpec::Yield(y) => s.yields = Some(y.clone()),
                DduSpec::FrMoment(f) => s.fr = Some(f.clone()),
                DduSpec::ProductStructure(p) => s.idm = Some(p.clone()),
            }
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermMeans {
    pub equipment_cost: f64,
    pub degradation_cost: f64,
    pub purchase_cost: f64,
    pub fr_penalty: f64,
    pub main_revenue: f64,
    pub by_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub seed: u64,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub q05: f64,
    pub q95: f64,
    /// Share of (trial, hour) pairs whose load fell outside the box.
    pub fr_violation_rate: f64,
    pub fr_violation_by_hour: Vec<f64>,
    /// Trials with no feasible recourse; excluded from the cost statistics.
    pub infeasible_trials: usize,
    pub term_means: TermMeans,
    pub mean_net_purchase: Vec<f64>,
}

impl McSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Population variance of an hourly series.
pub fn hourly_variance(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let n = series.len() as f64;
    let mean = pairwise_sum(series) / n;
    let sq: Vec<f64> = series.iter().map(|x| (x - mean) * (x - mean)).collect();
    pairwise_sum(&sq) / n
}

/// `(mu1, sigma1)` of the deviation law for one hour.
fn moment_point(fr: &FrMomentModel, hour: usize, point: MomentPoint) -> Result<(f64, f64), ScenarioError> {
    let s = fr.sigma[hour];
    let a = (fr.gamma1 * s).sqrt();
    let r = (fr.gamma2 * s).sqrt();
    Ok(match point {
        MomentPoint::Center => (0.0, r),
        MomentPoint::Worst => {
            let z = normal_quantile(fr.quantile_level(hour)?)?;
            if z <= 0.0 {
                (a.min(r), 0.0)
            } else {
                let norm = (1.0 + z * z).sqrt();
                let mu1 = a.min(r / norm);
                (mu1, (r * r - mu1 * mu1).max(0.0).sqrt())
            }
        }
    })
}

struct Trial {
    violations: Vec<bool>,
    outcome: Option<([f64; 7], Vec<f64>)>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Samples yields inside their sets, loads from the moment family and the
/// by-product weight at the posterior mean, re-optimizes the dispatch for
/// each draw, and summarizes the resulting cost reports.
pub fn monte_carlo_eval(
    graph: &FactoryGraph,
    schedule: &ScheduleDecision,
    samplers: &Samplers,
    n: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<McSummary, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::Invalid("need at least one trial".into()));
    }
    graph.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    check_binaries(graph, schedule).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let hz = graph.horizon;

    // Load box and deviation law per hour.
    let mut center = vec![0.0; hz];
    let mut bx = vec![(0.0, 0.0); hz];
    let mut dev = vec![(0.0, 0.0); hz];
    let mut tail = vec![0.5; hz];
    if let Some(fr) = &samplers.fr {
        fr.validate()?;
        if fr.horizon() != hz {
            return Err(ScenarioError::Invalid("load model horizon differs from the factory".into()));
        }
        for h in 0..hz {
            let d = fr_delta(fr, h, fr.mu[h])?;
            bx[h] = (fr.mu[h] - d, fr.mu[h] + d);
            center[h] = fr.mu[h] + fr.drift(fr.mu[h]);
            dev[h] = moment_point(fr, h, samplers.moment)?;
            tail[h] = 0.5 * fr.epsilon;
        }
    }

    // By-product weight: posterior mean of the band the schedule sits in,
    // kept inside the band.
    let mut zeta = vec![0.0; hz];
    if let Some(idm) = &samplers.idm {
        let mut idm = idm.clone();
        let active: Vec<Option<usize>> = (0..hz).map(|h| idm.active_state(|o| schedule.is_on(h, o))).collect();
        idm.set_rt_counts(&active);
        for (h, a) in active.iter().enumerate() {
            if let Some(i) = a.filter(|&i| idm.is_byproduct_state(i)) {
                let band = idm_interval(&idm, h, i)?;
                zeta[h] = idm.ratios[i] * band.posterior_mean.clamp(band.lo, band.hi);
            }
        }
    }

    // Yield range per (h, n, p): the set the schedule commits to.
    let ranges: Vec<Vec<Vec<(f64, f64)>>> = (0..hz)
        .map(|h| {
            graph
                .workshops
                .iter()
                .enumerate()
                .map(|(ni, w)| {
                    w.options
                        .iter()
                        .enumerate()
                        .map(|(p, opt)| {
                            let o = OptionRef::new(ni, p);
                            match &samplers.yields {
                                Some(y) if y.is_corrected(o) => (y.corrected_floor(o, |m| schedule.is_on(h, m)), 1.0),
                                _ => (opt.yield_rate, opt.yield_rate),
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let trials: Vec<Result<Trial, ScenarioError>> = map_indexed(n, parallelism, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut u = vec![0.0; hz];
        for h in 0..hz {
            let (mu1, s1) = dev[h];
            let s = if s1 <= 0.0 {
                mu1
            } else {
                match samplers.law {
                    LoadLaw::TruncatedGaussian => {
                        let law = Normal::new(mu1, s1).expect("positive sigma");
                        loop {
                            let v = law.sample(&mut rng);
                            if (v - mu1).abs() <= 4.0 * s1 {
                                break v;
                            }
                        }
                    }
                    LoadLaw::TwoPoint => {
                        let p = tail[h];
                        if rng.random_bool(p) {
                            mu1 + s1 * ((1.0 - p) / p).sqrt()
                        } else {
                            mu1 - s1 * (p / (1.0 - p)).sqrt()
                        }
                    }
                }
            };
            u[h] = center[h] + s;
        }
        let violations: Vec<bool> = (0..hz).map(|h| u[h] < bx[h].0 - 1e-12 || u[h] > bx[h].1 + 1e-12).collect();
        let alpha: Vec<Vec<Vec<f64>>> = ranges
            .iter()
            .map(|hr| {
                hr.iter()
                    .map(|w| w.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect())
                    .collect()
            })
            .collect();
        let wx = WxValues { alpha, zeta: zeta.clone() };
        let inputs = crate::ddccg::fixed_inputs(graph, schedule, &wx);
        let (model, vars) = crate::ddccg::recourse_lp(graph, &inputs, &u);
        let sol = solve_lp(&model).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if !sol.is_optimal() {
            return Ok(Trial { violations, outcome: None });
        }
        let get = |ids: &[crate::optkernel::VarId]| ids.iter().map(|&v| sol.value(v).max(0.0)).collect::<Vec<f64>>();
        let dispatch = EnergyDispatch { e_eu: get(&vars.e_eu), e_lu: get(&vars.e_lu), e_su: get(&vars.e_su), e_fr: get(&vars.e_fr) };
        let mut plan = schedule.clone();
        plan.byproduct_sales = if vars.sales.is_empty() { vec![0.0; hz] } else { get(&vars.sales) };
        let real = UncertaintyRealization { yields: wx.alpha, expected_load: u, zeta: wx.zeta };
        match simulate_schedule(graph, &plan, &dispatch, &real) {
            Ok(r) => Ok(Trial {
                violations,
                outcome: Some((
                    [
                        r.objective,
                        r.equipment_cost,
                        r.degradation_cost,
                        r.purchase_cost,
                        r.fr_penalty,
                        r.main_revenue,
                        r.by_revenue,
                    ],
                    r.hourly.net_purchase,
                )),
            }),
            Err(_) => Ok(Trial { violations, outcome: None }),
        }
    });

    let mut by_hour = vec![0usize; hz];
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 7];
    let mut net: Vec<Vec<f64>> = vec![Vec::with_capacity(n); hz];
    let mut infeasible = 0;
    for t in trials {
        let t = t?;
        for (h, v) in t.violations.iter().enumerate() {
            by_hour[h] += usize::from(*v);
        }
        match t.outcome {
            Some((terms, np)) => {
                for (c, v) in cols.iter_mut().zip(terms) {
                    c.push(v);
                }
                for (h, v) in np.into_iter().enumerate() {
                    net[h].push(v);
                }
            }
            None => infeasible += 1,
        }
    }
    let ok = cols[0].len();
    let mean = |c: &[f64]| if c.is_empty() { f64::NAN } else { pairwise_sum(c) / c.len() as f64 };
    let m = mean(&cols[0]);
    let std = if ok > 1 {
        let sq: Vec<f64> = cols[0].iter().map(|x| (x - m) * (x - m)).collect();
        (pairwise_sum(&sq) / (ok - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = cols[0].clone();
    sorted.sort_by(f64::total_cmp);
    let total_viol: usize = by_hour.iter().sum();
    Ok(McSummary {
        n,
        seed,
        mean_objective: m,
        std_objective: std,
        q05: quantile(&sorted, 0.05),
        q95: quantile(&sorted, 0.95),
        fr_violation_rate: total_viol as f64 / (n * hz) as f64,
        fr_violation_by_hour: by_hour.iter().map(|&c| c as f64 / n as f64).collect(),
        infeasible_trials: infeasible,
        term_means: TermMeans {
            equipment_cost: mean(&cols[1]),
            degradation_cost: mean(&cols[2]),
            purchase_cost: mean(&cols[3]),
            fr_penalty: mean(&cols[4]),
            main_revenue: mean(&cols[5]),
            by_revenue: mean(&cols[6]),
        },
        mean_net_purchase: net.iter().map(|c| mean(c)).collect(),
    })
}
