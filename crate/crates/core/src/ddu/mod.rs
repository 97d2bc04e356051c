//! Decision-dependent uncertainty models and their linear reductions.
//!
//! * [`YieldAmbiguity`]: yield floors corrected by line combinations.
//! * [`FrMomentModel`]: two-moment ambiguity on the utility's expected load,
//!   reduced to a box through Cantelli's inequality.
//! * [`ProductStructureIdm`]: imprecise Dirichlet bands on line-combination
//!   states, aggregated into a by-product weight.

mod fr;
pub mod history;
mod idm;
pub mod special;
mod yields;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fr::{cantelli_bound, estimate_moments, fr_delta, worst_moment_shift, FrMomentModel};
pub use idm::{idm_interval, theta_band, zeta_rows, LineState, ProductStructureIdm, ThetaInterval};
pub use special::{inv_reg_inc_beta, normal_cdf, normal_quantile, reg_inc_beta};
pub use yields::{and_linearize, and_variable, yield_bound_rows, yield_output_expr, YieldAmbiguity, YieldCombo};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DduError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid uncertainty spec: {0}")]
    Invalid(String),
    #[error("history file: {0}")]
    History(String),
}

/// Which decision stage an uncertainty's set depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DduSpec {
    Yield(YieldAmbiguity),
    FrMoment(FrMomentModel),
    ProductStructure(ProductStructureIdm),
}

impl DduSpec {
    /// Stages whose decisions shape this uncertainty set.
    pub fn coupled_stages(&self) -> Vec<Stage> {
        match self {
            DduSpec::Yield(_) | DduSpec::ProductStructure(_) => vec![Stage::First],
            DduSpec::FrMoment(_) => vec![Stage::Second],
        }
    }
}
