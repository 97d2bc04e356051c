//! Uncertainty plan for the bundled engine line: a seeded load history,
//! line states for the liner outlet and yield corrections on cylinder
//! mounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FitSpec, HistoryBundle, ScenarioError, SyntheticInstance};
use crate::ddu::history::LineRecord;
use crate::ddu::{LineState, YieldAmbiguity, YieldCombo};
use crate::factory::{engine_window, OptionRef, ScheduleDecision};

/// Utility-side expected load per hour of day, kWh.
const LOAD_PROFILE: [f64; 24] = [
    40.0, 40.0, 40.0, 40.0, 45.0, 60.0, 90.0, 120.0, 140.0, 150.0, 150.0, 140.0, //
    120.0, 130.0, 140.0, 150.0, 140.0, 120.0, 100.0, 80.0, 60.0, 50.0, 45.0, 40.0,
];

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// The engine case over its first `hours` hours with a fitted-from-history
/// uncertainty plan.
///
/// `noisy_hours` of the window (the first ones) get scattered load samples;
/// the rest are constant, so the oracle only branches on those.
pub fn engine_instance(hours: usize, noisy_hours: usize, seed: u64) -> Result<SyntheticInstance, ScenarioError> {
    let graph = engine_window(hours);
    let hz = graph.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let find = |shop: &str| {
        graph
            .workshops
            .iter()
            .position(|w| w.id == shop)
            .ok_or_else(|| ScenarioError::Invalid(format!("engine case has no workshop {shop}")))
    };
    let crank = find("crank_mount")?;
    let cyl = find("cyl_mount")?;
    let liner = find("piston_liner")?;

    let mut load_samples = Vec::with_capacity(hz);
    for (h, &mu) in LOAD_PROFILE.iter().take(hz).enumerate() {
        if h < noisy_hours {
            let law = Normal::new(mu, 0.1 * mu).expect("positive sigma");
            load_samples.push((0..60).map(|_| r2(law.sample(&mut rng).max(0.0))).collect());
        } else {
            load_samples.push(vec![mu; 60]);
        }
    }

    // Liner share depends on which crank-mounting line feeds the block.
    let states = vec![
        LineState { id: "auto_crank".into(), members: vec![OptionRef::new(crank, 0), OptionRef::new(liner, 0)] },
        LineState { id: "robot_crank".into(), members: vec![OptionRef::new(crank, 1), OptionRef::new(liner, 0)] },
    ];
    let mut line_history = Vec::new();
    for (st, ratio) in states.iter().zip([0.35, 0.6]) {
        for h in 0..hz {
            line_history.push(LineRecord { hour: h, state_id: st.id.clone(), count: rng.random_range(1..=5), ratio });
        }
    }

    let alpha_floor: Vec<Vec<f64>> = graph
        .workshops
        .iter()
        .map(|ws| ws.options.iter().map(|o| r2(o.yield_rate - 0.02)).collect())
        .collect();
    let target = OptionRef::new(cyl, 0);
    let yields = YieldAmbiguity {
        alpha_floor,
        combos: vec![
            YieldCombo { target, members: vec![OptionRef::new(crank, 0)], delta: 0.08 },
            YieldCombo { target, members: vec![OptionRef::new(crank, 1)], delta: 0.03 },
        ],
        corrected_set: vec![target],
    };

    let fit_spec = FitSpec {
        states,
        s: 1.0,
        gamma: 0.9,
        ratio_threshold: 0.0,
        gamma1: 0.5,
        gamma2: 1.0,
        epsilon: 0.1,
        drift_k: 0.0,
        drift_b: 0.0,
    };
    let rtp_profile = graph.energy.rtp.clone();
    let planted = ScheduleDecision::idle(&graph);
    Ok(SyntheticInstance {
        graph,
        history: HistoryBundle { load_samples, line_history, rtp_profile },
        fit_spec,
        yields: Some(yields),
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddccg::split_problem;

    #[test]
    fn plan_fits_and_splits() {
        let inst = engine_instance(3, 2, 1).unwrap();
        assert_eq!(inst.history.horizon(), 3);
        let split = split_problem(&inst.graph, &inst.entries().unwrap()).unwrap();
        let varying = split.load_box().unwrap().iter().filter(|b| b.1 > b.0).count();
        assert_eq!(varying, 2);
        assert!(split.idm().is_some());
    }
}
