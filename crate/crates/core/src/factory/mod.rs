//! Plant model: production network, buffers and the energy system.
//!
//! Time is discrete with hours `0..H`. Buffer levels and battery state are
//! indexed `0..=H` (level `h + 1` is the level after hour `h`).

mod constraints;
mod engine;
mod simulate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constraints::{emit_constraints, emit_constraints_with, schedule_assignment, ConstraintBlock, ConstraintSet};
pub use engine::{build_engine_case, engine_window};
pub use simulate::{check_binaries, production, simulate_schedule, CostReport, HourlyReport, Production};

/// Default stock of buffer 0 when the instance does not give one.
pub const DEFAULT_SOURCE_STOCK: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OptionRef {
    pub workshop: usize,
    pub option: usize,
}

impl OptionRef {
    pub fn new(workshop: usize, option: usize) -> Self {
        Self { workshop, option }
    }
}

impl fmt::Display for OptionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.workshop, self.option)
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_false(v: &bool) -> bool {
    !*v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquipmentOption {
    pub id: String,
    /// Hours per use.
    pub time_cost: f64,
    /// kWh per use.
    pub energy_cost: f64,
    #[serde(rename = "output")]
    pub output_qty: f64,
    #[serde(rename = "input")]
    pub input_qty: f64,
    pub min_uptime: usize,
    pub max_daily_uses: usize,
    /// Nominal yield for options without a yield ambiguity model.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub yield_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workshop {
    pub id: String,
    pub options: Vec<EquipmentOption>,
    pub location: [f64; 2],
    /// Buffers this workshop draws its input from.
    #[serde(default)]
    pub upstream_buffers: Vec<String>,
    /// Buffers receiving this workshop's output.
    #[serde(default)]
    pub downstream_buffers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Buffer {
    pub id: String,
    /// Initial stock; when absent, buffer 0 starts at [`DEFAULT_SOURCE_STOCK`] and all others empty.
    #[serde(rename = "initial", default, skip_serializing_if = "Option::is_none")]
    pub initial_stock: Option<f64>,
    #[serde(rename = "batch")]
    pub transport_batch: f64,
    pub transport_time: f64,
    #[serde(rename = "byproduct_outlet", default)]
    pub is_byproduct_outlet: bool,
    /// Finished-goods buffer whose final level earns the main sale price.
    #[serde(default, skip_serializing_if = "is_false")]
    pub main_output: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySystem {
    pub bess_capacity: f64,
    pub bess_initial: f64,
    pub discharge_eff: f64,
    pub charge_eff: f64,
    pub ramp_lo: f64,
    pub ramp_hi: f64,
    pub rtp: Vec<f64>,
    pub der_output: Vec<f64>,
    pub degr_coeff: f64,
    pub sale_price_main: f64,
    pub sale_price_by: f64,
    /// Currency per equipment-hour (including transport hours).
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub equipment_rate: f64,
    /// Currency per kWh of deviation from the utility's expected load.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub fr_weight: f64,
    /// Optional per-hour cap on purchased energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_cap: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoryGraph {
    pub horizon: usize,
    pub workshops: Vec<Workshop>,
    pub buffers: Vec<Buffer>,
    pub energy: EnergySystem,
}

/// `I[h][n][p]` plus by-product sales per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub on: Vec<Vec<Vec<bool>>>,
    pub byproduct_sales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDispatch {
    pub e_eu: Vec<f64>,
    pub e_lu: Vec<f64>,
    pub e_su: Vec<f64>,
    pub e_fr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRealization {
    /// Realized yield per `[h][n][p]`.
    pub yields: Vec<Vec<Vec<f64>>>,
    /// Utility's expected load per hour.
    pub expected_load: Vec<f64>,
    /// By-product weight per hour.
    pub zeta: Vec<f64>,
}

/// One failed check, with where it failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub check: String,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.check, self.location, self.message)
    }
}

fn diag(check: &str, location: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic { check: check.into(), location: location.into(), message: message.into() }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactoryError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("consistency error: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Consistency(Vec<Diagnostic>),
    #[error("infeasible schedule at hour {hour}: {constraint} ({detail})")]
    InfeasibleSchedule { hour: usize, constraint: String, detail: String },
}

/// Parses and validates an instance document.
///
/// Unknown keys are rejected unless `lenient` is set.
pub fn load_factory(source: &str, lenient: bool) -> Result<FactoryGraph, FactoryError> {
    let mut unknown: Vec<String> = Vec::new();
    let mut de = serde_json::Deserializer::from_str(source);
    let mut record = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
    let ignored = serde_ignored::Deserializer::new(&mut de, &mut record);
    let graph: FactoryGraph = serde_path_to_error::deserialize(ignored).map_err(|e| FactoryError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| FactoryError::Schema { path: ".".into(), message: e.to_string() })?;
    if !lenient {
        if let Some(path) = unknown.into_iter().next() {
            return Err(FactoryError::Schema { path, message: "unknown key".into() });
        }
    }
    let problems = graph.check();
    if problems.is_empty() {
        Ok(graph)
    } else {
        Err(FactoryError::Consistency(problems))
    }
}

impl FactoryGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("factory graphs always serialize")
    }

    pub fn num_workshops(&self) -> usize {
        self.workshops.len()
    }

    pub fn option(&self, o: OptionRef) -> &EquipmentOption {
        &self.workshops[o.workshop].options[o.option]
    }

    /// All options in workshop-major order.
    pub fn option_refs(&self) -> Vec<OptionRef> {
        self.workshops
            .iter()
            .enumerate()
            .flat_map(|(n, w)| (0..w.options.len()).map(move |p| OptionRef::new(n, p)))
            .collect()
    }

    pub fn option_counts(&self) -> Vec<usize> {
        self.workshops.iter().map(|w| w.options.len()).collect()
    }

    pub fn num_first_stage_binaries(&self) -> usize {
        self.horizon * self.option_counts().iter().sum::<usize>()
    }

    pub fn buffer_index(&self, id: &str) -> Option<usize> {
        self.buffers.iter().position(|b| b.id == id)
    }

    pub fn initial_stock(&self, m: usize) -> f64 {
        self.buffers[m].initial_stock.unwrap_or(if m == 0 { DEFAULT_SOURCE_STOCK } else { 0.0 })
    }

    /// Workshops feeding buffer `m`.
    pub fn producers(&self, m: usize) -> Vec<usize> {
        let id = &self.buffers[m].id;
        (0..self.workshops.len()).filter(|&n| self.workshops[n].downstream_buffers.contains(id)).collect()
    }

    /// Workshops drawing from buffer `m`.
    pub fn consumers(&self, m: usize) -> Vec<usize> {
        let id = &self.buffers[m].id;
        (0..self.workshops.len()).filter(|&n| self.workshops[n].upstream_buffers.contains(id)).collect()
    }

    /// The by-product outlet buffer, if any.
    pub fn outlet(&self) -> Option<usize> {
        self.buffers.iter().position(|b| b.is_byproduct_outlet)
    }

    /// The finished-goods buffer: the flagged one, else the last non-outlet buffer.
    pub fn main_buffer(&self) -> Option<usize> {
        self.buffers
            .iter()
            .position(|b| b.main_output)
            .or_else(|| self.buffers.iter().rposition(|b| !b.is_byproduct_outlet))
    }

    /// Every invariant of the instance; empty when valid.
    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push(diag("horizon", "horizon", "horizon must be at least 1"));
        }
        let mut ids = BTreeSet::new();
        for (n, w) in self.workshops.iter().enumerate() {
            let at = format!("workshops[{n}]");
            if !ids.insert(format!("w:{}", w.id)) {
                out.push(diag("unique_id", &at, format!("duplicate workshop id {}", w.id)));
            }
            if w.options.is_empty() {
                out.push(diag("options", &at, "workshop has no options"));
            }
            for (p, o) in w.options.iter().enumerate() {
                let at = format!("workshops[{n}].options[{p}]");
                if !(o.time_cost > 0.0) {
                    out.push(diag("time_cost", &at, "time_cost must be positive"));
                }
                if !(o.energy_cost >= 0.0) {
                    out.push(diag("energy_cost", &at, "energy_cost must be nonnegative"));
                }
                if o.min_uptime < 1 {
                    out.push(diag("min_uptime", &at, "min_uptime must be at least 1"));
                }
                if !(o.output_qty >= 0.0) || !(o.input_qty >= 0.0) {
                    out.push(diag("quantities", &at, "input and output must be nonnegative"));
                }
                if !(0.0..=1.0).contains(&o.yield_rate) {
                    out.push(diag("yield_rate", &at, "yield_rate must lie in [0, 1]"));
                }
            }
            for (kind, list) in [("upstream_buffers", &w.upstream_buffers), ("downstream_buffers", &w.downstream_buffers)] {
                for b in list {
                    if self.buffer_index(b).is_none() {
                        out.push(diag("buffer_edge", format!("{at}.{kind}"), format!("edge {} -> {b} references a missing buffer", w.id)));
                    }
                }
            }
        }
        for (m, b) in self.buffers.iter().enumerate() {
            let at = format!("buffers[{m}]");
            if !ids.insert(format!("b:{}", b.id)) {
                out.push(diag("unique_id", &at, format!("duplicate buffer id {}", b.id)));
            }
            if !(self.initial_stock(m) >= 0.0) {
                out.push(diag("initial", &at, "initial stock must be nonnegative"));
            }
            if !(b.transport_batch > 0.0) {
                out.push(diag("batch", &at, "transport batch must be positive"));
            }
            if !(b.transport_time >= 0.0) {
                out.push(diag("transport_time", &at, "transport time must be nonnegative"));
            }
            if b.is_byproduct_outlet && b.main_output {
                out.push(diag("main_output", &at, "the main-product buffer cannot be a by-product outlet"));
            }
        }
        if self.buffers.iter().filter(|b| b.is_byproduct_outlet).count() > 1 {
            out.push(diag("byproduct_outlet", "buffers", "at most one by-product outlet is supported"));
        }
        if self.buffers.iter().filter(|b| b.main_output).count() > 1 {
            out.push(diag("main_output", "buffers", "at most one buffer may be flagged main_output"));
        }
        let e = &self.energy;
        let h = self.horizon;
        for (name, series) in [("rtp", Some(&e.rtp)), ("der_output", Some(&e.der_output)), ("grid_cap", e.grid_cap.as_ref())] {
            let Some(series) = series else { continue };
            if series.len() != h {
                out.push(diag("horizon", format!("energy.{name}"), format!("length {} differs from horizon {h}", series.len())));
            }
            for (t, v) in series.iter().enumerate() {
                if !(*v >= 0.0) {
                    out.push(diag(name, format!("energy.{name}[{t}]"), format!("negative entry {v} at hour {t}")));
                }
            }
        }
        if !(e.discharge_eff > 0.0 && e.discharge_eff <= 1.0 && e.charge_eff > 0.0 && e.charge_eff <= 1.0) {
            out.push(diag("efficiency", "energy", "efficiencies must lie in (0, 1]"));
        }
        if !(0.0 <= e.ramp_lo && e.ramp_lo <= e.ramp_hi) {
            out.push(diag("ramp", "energy", "need 0 <= ramp_lo <= ramp_hi"));
        }
        if !(0.0 <= e.bess_initial && e.bess_initial <= e.bess_capacity) {
            out.push(diag("bess_initial", "energy", "need 0 <= bess_initial <= bess_capacity"));
        }
        for (name, v) in [
            ("degr_coeff", e.degr_coeff),
            ("sale_price_main", e.sale_price_main),
            ("sale_price_by", e.sale_price_by),
            ("equipment_rate", e.equipment_rate),
            ("fr_weight", e.fr_weight),
        ] {
            if !(v >= 0.0) {
                out.push(diag(name, format!("energy.{name}"), "must be nonnegative"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), FactoryError> {
        let problems = self.check();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(FactoryError::Consistency(problems))
        }
    }
}

impl ScheduleDecision {
    pub fn idle(graph: &FactoryGraph) -> Self {
        Self {
            on: (0..graph.horizon)
                .map(|_| graph.workshops.iter().map(|w| vec![false; w.options.len()]).collect())
                .collect(),
            byproduct_sales: vec![0.0; graph.horizon],
        }
    }

    pub fn is_on(&self, h: usize, o: OptionRef) -> bool {
        self.on[h][o.workshop][o.option]
    }

    /// Active `(h, n, p)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (h, hour) in self.on.iter().enumerate() {
            for (n, w) in hour.iter().enumerate() {
                for (p, &b) in w.iter().enumerate() {
                    if b {
                        out.push((h, n, p));
                    }
                }
            }
        }
        out
    }
}

impl EnergyDispatch {
    pub fn zero(horizon: usize) -> Self {
        Self { e_eu: vec![0.0; horizon], e_lu: vec![0.0; horizon], e_su: vec![0.0; horizon], e_fr: vec![0.0; horizon] }
    }
}

impl UncertaintyRealization {
    /// Nominal yields, zero expected load, zero by-product weight.
    pub fn nominal(graph: &FactoryGraph) -> Self {
        Self {
            yields: (0..graph.horizon)
                .map(|_| graph.workshops.iter().map(|w| w.options.iter().map(|o| o.yield_rate).collect()).collect())
                .collect(),
            expected_load: vec![0.0; graph.horizon],
            zeta: vec![0.0; graph.horizon],
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_json() -> &'static str {
        r#"{
          "horizon": 2,
          "workshops": [{
            "id": "w0",
            "options": [
              {"id": "a", "time_cost": 1, "energy_cost": 2, "output": 1, "input": 1, "min_uptime": 1, "max_daily_uses": 2},
              {"id": "b", "time_cost": 2, "energy_cost": 1, "output": 1, "input": 1, "min_uptime": 1, "max_daily_uses": 2}
            ],
            "location": [0, 0],
            "upstream_buffers": ["in"],
            "downstream_buffers": ["out"]
          }],
          "buffers": [
            {"id": "in", "initial": 5, "batch": 10, "transport_time": 0.5, "byproduct_outlet": false},
            {"id": "out", "batch": 10, "transport_time": 0.5, "byproduct_outlet": false}
          ],
          "energy": {
            "bess_capacity": 10, "bess_initial": 5, "discharge_eff": 0.95, "charge_eff": 0.95,
            "ramp_lo": 0, "ramp_hi": 5, "rtp": [0.1, 0.2], "der_output": [1, 1],
            "degr_coeff": 0.01, "sale_price_main": 3, "sale_price_by": 1
          }
        }"#
    }

    #[test]
    fn minimal_instance_loads() {
        let g = load_factory(minimal_json(), false).unwrap();
        assert_eq!(g.workshops.len() + g.buffers.len(), 3);
        assert_eq!(g.main_buffer(), Some(1));
        assert_eq!(g.initial_stock(1), 0.0);
    }

    #[test]
    fn rtp_length_mismatch_is_consistency_error() {
        let doc = minimal_json().replace("\"rtp\": [0.1, 0.2]", "\"rtp\": [0.1]");
        match load_factory(&doc, false) {
            Err(FactoryError::Consistency(d)) => assert!(d.iter().any(|d| d.location == "energy.rtp")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_paths() {
        let doc = minimal_json().replace("\"time_cost\": 2", "\"time_cost\": \"slow\"");
        match load_factory(&doc, false) {
            Err(FactoryError::Schema { path, .. }) => assert_eq!(path, "workshops[0].options[1].time_cost"),
            other => panic!("{other:?}"),
        }
        let doc = minimal_json().replace("\"min_uptime\": 1, \"max_daily_uses\": 2}\n            ]", "\"max_daily_uses\": 2}]");
        assert!(load_factory(&doc, false).is_err());
    }

    #[test]
    fn unknown_keys_rejected_unless_lenient() {
        let doc = minimal_json().replace("\"horizon\": 2,", "\"horizon\": 2, \"colour\": \"blue\",");
        assert!(matches!(load_factory(&doc, false), Err(FactoryError::Schema { .. })));
        assert!(load_factory(&doc, true).is_ok());
    }

    #[test]
    fn dangling_edge_named() {
        let doc = minimal_json().replace("\"downstream_buffers\": [\"out\"]", "\"downstream_buffers\": [\"nowhere\"]");
        match load_factory(&doc, false) {
            Err(FactoryError::Consistency(d)) => assert!(d[0].message.contains("w0 -> nowhere")),
            other => panic!("{other:?}"),
        }
    }
}
