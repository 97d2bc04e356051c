//! Histories, parameter fitting, synthetic instances and out-of-sample
//! evaluation.

mod engine;
mod montecarlo;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddccg::{DdccgError, DduEntry};
use crate::ddu::history::{LineRecord, LoadSample};
use crate::ddu::{estimate_moments, DduError, DduSpec, FrMomentModel, LineState, ProductStructureIdm};

pub use engine::engine_instance;
pub use montecarlo::{monte_carlo_eval, hourly_variance, LoadLaw, McSummary, MomentPoint, Samplers, TermMeans};
pub use synthetic::{gen_synthetic, SyntheticConfig, SyntheticInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("no load samples for hour {0}")]
    MissingHour(usize),
    #[error("history hour {hour} outside horizon {horizon}")]
    HourOutOfRange { hour: usize, horizon: usize },
    #[error("line history names unknown state {0}")]
    UnknownState(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Ddu(#[from] DduError),
    #[error(transparent)]
    Ddccg(#[from] DdccgError),
}

/// Raw observations the uncertainty models are fitted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryBundle {
    /// Expected-load samples per hour, kWh.
    pub load_samples: Vec<Vec<f64>>,
    pub line_history: Vec<LineRecord>,
    #[serde(default)]
    pub rtp_profile: Vec<f64>,
}

impl HistoryBundle {
    pub fn horizon(&self) -> usize {
        self.load_samples.len()
    }

    /// Groups flat `hour,sample` rows into per-hour lists.
    pub fn from_records(
        horizon: usize,
        loads: &[LoadSample],
        line_history: Vec<LineRecord>,
        rtp_profile: Vec<f64>,
    ) -> Result<Self, ScenarioError> {
        let mut load_samples = vec![Vec::new(); horizon];
        for s in loads {
            load_samples
                .get_mut(s.hour)
                .ok_or(ScenarioError::HourOutOfRange { hour: s.hour, horizon })?
                .push(s.sample_kwh);
        }
        Ok(Self { load_samples, line_history, rtp_profile })
    }

    pub fn load_records(&self) -> Vec<LoadSample> {
        self.load_samples
            .iter()
            .enumerate()
            .flat_map(|(hour, v)| v.iter().map(move |&sample_kwh| LoadSample { hour, sample_kwh }))
            .collect()
    }
}

/// Everything the fit needs beyond the raw history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    /// State definitions; line-history rows refer to them by id.
    #[serde(default)]
    pub states: Vec<LineState>,
    #[serde(default = "default_s")]
    pub s: f64,
    /// Confidence level of the IDM bands.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub ratio_threshold: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub drift_k: f64,
    #[serde(default)]
    pub drift_b: f64,
}

fn default_s() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParams {
    pub fr: FrMomentModel,
    pub idm: Option<ProductStructureIdm>,
}

impl FittedParams {
    /// Plan entries for the solver, with an optional yield model in front.
    pub fn entries(&self, yields: Option<&crate::ddu::YieldAmbiguity>) -> Vec<DduEntry> {
        let mut out: Vec<DduEntry> = Vec::new();
        if let Some(y) = yields {
            out.push(DduSpec::Yield(y.clone()).into());
        }
        if let Some(idm) = &self.idm {
            out.push(DduSpec::ProductStructure(idm.clone()).into());
        }
        out.push(DduSpec::FrMoment(self.fr.clone()).into());
        out
    }
}

/// Moments per hour and IDM counts per hour and state.
///
/// A state's ratio is the count-weighted mean of the ratios recorded for it
/// (the plain mean when all its counts are zero, 0 when it never appears).
pub fn fit_ddu_params(bundle: &HistoryBundle, spec: &FitSpec) -> Result<FittedParams, ScenarioError> {
    let hz = bundle.horizon();
    if hz == 0 {
        return Err(ScenarioError::MissingHour(0));
    }
    let mut mu = Vec::with_capacity(hz);
    let mut sigma = Vec::with_capacity(hz);
    for (h, samples) in bundle.load_samples.iter().enumerate() {
        let (m, s) = estimate_moments(samples).map_err(|_| ScenarioError::MissingHour(h))?;
        mu.push(m);
        sigma.push(s);
    }
    let fr = FrMomentModel {
        mu,
        sigma,
        drift_k: spec.drift_k,
        drift_b: spec.drift_b,
        gamma1: spec.gamma1,
        gamma2: spec.gamma2,
        epsilon: spec.epsilon,
        samples_per_hour: bundle.load_samples.iter().map(Vec::len).min().unwrap_or(0),
    };
    fr.validate()?;

    let idm = if spec.states.is_empty() {
        if let Some(r) = bundle.line_history.first() {
            return Err(ScenarioError::UnknownState(r.state_id.clone()));
        }
        None
    } else {
        let k = spec.states.len();
        let mut hist = vec![vec![0u64; k]; hz];
        let mut weighted = vec![0.0; k];
        let mut weight = vec![0u64; k];
        let mut plain = vec![(0.0, 0usize); k];
        for r in &bundle.line_history {
            let i = spec
                .states
                .iter()
                .position(|s| s.id == r.state_id)
                .ok_or_else(|| ScenarioError::UnknownState(r.state_id.clone()))?;
            if r.hour >= hz {
                return Err(ScenarioError::HourOutOfRange { hour: r.hour, horizon: hz });
            }
            hist[r.hour][i] += r.count;
            weighted[i] += r.ratio * r.count as f64;
            weight[i] += r.count;
            plain[i].0 += r.ratio;
            plain[i].1 += 1;
        }
        let ratios = (0..k)
            .map(|i| match (weight[i], plain[i].1) {
                (0, 0) => 0.0,
                (0, c) => plain[i].0 / c as f64,
                (w, _) => weighted[i] / w as f64,
            })
            .collect();
        let idm = ProductStructureIdm {
            states: spec.states.clone(),
            ratios,
            hist_counts: hist,
            rt_counts: vec![vec![0; k]; hz],
            s: spec.s,
            gamma: spec.gamma,
            priors: vec![1.0 / k as f64; k],
            ratio_threshold: spec.ratio_threshold,
        };
        idm.validate()?;
        Some(idm)
    };
    Ok(FittedParams { fr, idm })
}
