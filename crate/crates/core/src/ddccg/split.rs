//! Assignment of variables and uncertainty sets to the two stages.

use serde::{Deserialize, Serialize};

use super::DdccgError;
use crate::ddu::{fr_delta, DduSpec, FrMomentModel, ProductStructureIdm, Stage, YieldAmbiguity};
use crate::factory::FactoryGraph;

/// An uncertainty model as read from a plan file. `couples` overrides the
/// stage the model is attached to; it exists so malformed plans can be
/// rejected instead of silently reinterpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DduEntry {
    #[serde(flatten)]
    pub spec: DduSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couples: Option<Vec<Stage>>,
}

impl From<DduSpec> for DduEntry {
    fn from(spec: DduSpec) -> Self {
        Self { spec, couples: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSplit {
    pub graph: FactoryGraph,
    /// Names of the master-problem binaries.
    pub x_vars: Vec<String>,
    /// Names of the recourse variables.
    pub y_vars: Vec<String>,
    /// Sets shaped by the first-stage decision (yield, by-product weight).
    pub wx_specs: Vec<DduSpec>,
    /// Set shaped by the second stage (expected-load box).
    pub wy_spec: Option<FrMomentModel>,
}

impl ProblemSplit {
    pub fn yields(&self) -> Option<&YieldAmbiguity> {
        self.wx_specs.iter().find_map(|s| match s {
            DduSpec::Yield(y) => Some(y),
            _ => None,
        })
    }

    pub fn idm(&self) -> Option<&ProductStructureIdm> {
        self.wx_specs.iter().find_map(|s| match s {
            DduSpec::ProductStructure(p) => Some(p),
            _ => None,
        })
    }

    pub(crate) fn idm_mut(&mut self) -> Option<&mut ProductStructureIdm> {
        self.wx_specs.iter_mut().find_map(|s| match s {
            DduSpec::ProductStructure(p) => Some(p),
            _ => None,
        })
    }

    /// Per-hour interval `[mu - dE, mu + dE]` of the expected load. Without
    /// a load model the utility expects nothing and the box is `[0, 0]`.
    ///
    /// The drift term is evaluated at `mu` itself, so the box does not move
    /// with the dispatch.
    pub fn load_box(&self) -> Result<Vec<(f64, f64)>, DdccgError> {
        let h = self.graph.horizon;
        let Some(fr) = &self.wy_spec else {
            return Ok(vec![(0.0, 0.0); h]);
        };
        (0..h)
            .map(|t| {
                let d = fr_delta(fr, t, fr.mu[t])?;
                Ok((fr.mu[t] - d, fr.mu[t] + d))
            })
            .collect()
    }

    /// True when nothing is uncertain: no first-stage sets and a degenerate box.
    pub fn is_deterministic(&self) -> Result<bool, DdccgError> {
        Ok(self.wx_specs.is_empty() && self.load_box()?.iter().all(|(lo, hi)| hi - lo <= 1e-12))
    }
}

pub fn split_problem(graph: &FactoryGraph, entries: &[DduEntry]) -> Result<ProblemSplit, DdccgError> {
    graph.validate()?;
    if graph.energy.ramp_lo > 0.0 {
        // |dS| >= ramp_lo is not convex; the simulator checks it, the model cannot.
        return Err(DdccgError::Split("ramp_lo > 0 is not supported by the linear model".into()));
    }
    let hz = graph.horizon;
    let mut wx_specs = Vec::new();
    let mut wy_spec = None;
    for (i, e) in entries.iter().enumerate() {
        let natural = e.spec.coupled_stages();
        let stages = e.couples.clone().unwrap_or_else(|| natural.clone());
        if stages.len() != 1 {
            return Err(DdccgError::Split(format!("entry {i} couples to {} stages; exactly one is allowed", stages.len())));
        }
        if stages != natural {
            return Err(DdccgError::Split(format!("entry {i} cannot be attached to the {:?} stage", stages[0])));
        }
        let dup = |kind: &str| DdccgError::Split(format!("more than one {kind} model"));
        match &e.spec {
            DduSpec::Yield(y) => {
                y.validate(&graph.option_counts())?;
                if wx_specs.iter().any(|s| matches!(s, DduSpec::Yield(_))) {
                    return Err(dup("yield"));
                }
                wx_specs.push(e.spec.clone());
            }
            DduSpec::ProductStructure(p) => {
                p.validate()?;
                if p.horizon() != hz {
                    return Err(DdccgError::Split(format!("line history covers {} hours, horizon is {hz}", p.horizon())));
                }
                let counts = graph.option_counts();
                let known = |o: &crate::factory::OptionRef| o.workshop < counts.len() && o.option < counts[o.workshop];
                if !p.states.iter().all(|s| s.members.iter().all(known)) {
                    return Err(DdccgError::Split("a line state references an unknown option".into()));
                }
                if wx_specs.iter().any(|s| matches!(s, DduSpec::ProductStructure(_))) {
                    return Err(dup("product-structure"));
                }
                wx_specs.push(e.spec.clone());
            }
            DduSpec::FrMoment(f) => {
                f.validate()?;
                if f.horizon() != hz {
                    return Err(DdccgError::Split(format!("load moments cover {} hours, horizon is {hz}", f.horizon())));
                }
                if wy_spec.replace(f.clone()).is_some() {
                    return Err(dup("load"));
                }
            }
        }
    }
    let mut x_vars = Vec::new();
    for h in 0..hz {
        for o in graph.option_refs() {
            x_vars.push(format!("I[{h}][{}][{}]", o.workshop, o.option));
        }
    }
    let mut y_vars = Vec::new();
    for h in 0..hz {
        for v in ["E_EU", "E_LU", "E_SU", "Et", "E_fr"] {
            y_vars.push(format!("{v}[{h}]"));
        }
        y_vars.push(format!("S[{}]", h + 1));
        if graph.outlet().is_some() {
            y_vars.push(format!("B_ss[{h}]"));
        }
    }
    Ok(ProblemSplit { graph: graph.clone(), x_vars, y_vars, wx_specs, wy_spec })
}
