//! Seeded random instances with a planted feasible schedule.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded with `seed_from_u64`,
//! so the same configuration yields the same bytes on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{fit_ddu_params, FitSpec, FittedParams, HistoryBundle, ScenarioError};
use crate::ddccg::DduEntry;
use crate::ddu::history::LineRecord;
use crate::ddu::{LineState, YieldAmbiguity, YieldCombo};
use crate::factory::{
    production, Buffer, EnergySystem, EquipmentOption, FactoryGraph, OptionRef, ScheduleDecision, Workshop,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Workshops in the main chain (at least 1).
    pub workshops: usize,
    pub options_per_workshop: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Adds a workshop feeding a by-product outlet.
    pub byproduct: bool,
    /// Adds line-combination states over the by-product workshop.
    pub idm: bool,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    /// Confidence level of the IDM bands.
    pub idm_gamma: f64,
    pub idm_s: f64,
    /// Size of the yield-floor reductions; 0 disables the yield model.
    pub delta_alpha: f64,
    pub drift_k: f64,
    pub drift_b: f64,
    /// Hours whose load history is noisy; the rest repeat one value.
    pub varying_hours: usize,
    pub load_sigma: f64,
    pub samples_per_hour: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            workshops: 2,
            options_per_workshop: 2,
            horizon: 3,
            seed: 1,
            byproduct: true,
            idm: true,
            gamma1: 0.5,
            gamma2: 1.0,
            epsilon: 0.1,
            idm_gamma: 0.9,
            idm_s: 1.0,
            delta_alpha: 0.1,
            drift_k: 0.0,
            drift_b: 0.0,
            varying_hours: 2,
            load_sigma: 1.0,
            samples_per_hour: 40,
        }
    }
}

impl SyntheticConfig {
    /// The same instance with every uncertainty knob at zero.
    pub fn zero_intensity(mut self) -> Self {
        self.gamma1 = 0.0;
        self.gamma2 = 0.0;
        self.delta_alpha = 0.0;
        self.drift_k = 0.0;
        self.drift_b = 0.0;
        self.idm = false;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.workshops == 0 || self.options_per_workshop == 0 || self.horizon == 0 {
            return Err(ScenarioError::Invalid("workshops, options and horizon must be positive".into()));
        }
        if self.idm && !self.byproduct {
            return Err(ScenarioError::Invalid("line states need the by-product workshop".into()));
        }
        if self.samples_per_hour == 0 {
            return Err(ScenarioError::Invalid("samples_per_hour must be positive".into()));
        }
        if !(0.0..=0.5).contains(&self.delta_alpha) {
            return Err(ScenarioError::Invalid("delta_alpha must lie in [0, 0.5]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub graph: FactoryGraph,
    pub history: HistoryBundle,
    pub fit_spec: FitSpec,
    pub yields: Option<YieldAmbiguity>,
    /// A schedule known to be feasible with nominal yields.
    pub planted: ScheduleDecision,
}

impl SyntheticInstance {
    pub fn fitted(&self) -> Result<FittedParams, ScenarioError> {
        fit_ddu_params(&self.history, &self.fit_spec)
    }

    /// Plan entries fitted from the bundled history.
    pub fn entries(&self) -> Result<Vec<DduEntry>, ScenarioError> {
        Ok(self.fitted()?.entries(self.yields.as_ref()))
    }
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticInstance, ScenarioError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hz = cfg.horizon;
    let w = cfg.workshops;

    let option = |rng: &mut ChaCha8Rng, id: String| {
        let qty = rng.random_range(2..=4) as f64;
        EquipmentOption {
            id,
            time_cost: r2(rng.random_range(0.5..1.5)),
            energy_cost: r2(rng.random_range(1.0..5.0)),
            output_qty: qty,
            input_qty: qty,
            min_uptime: if rng.random_bool(0.6) { 1 } else { 2 },
            max_daily_uses: if hz > 2 && rng.random_bool(0.3) { hz - 1 } else { hz },
            yield_rate: r2(rng.random_range(0.9..1.0)),
        }
    };
    let mut workshops = Vec::new();
    for n in 0..w {
        let options = (0..cfg.options_per_workshop).map(|p| option(&mut rng, format!("o{p}"))).collect();
        let down = if n + 1 == w { "fin".to_string() } else { format!("b{}", n + 1) };
        workshops.push(Workshop {
            id: format!("w{n}"),
            options,
            location: [n as f64, 0.0],
            upstream_buffers: vec![format!("b{n}")],
            downstream_buffers: vec![down],
        });
    }
    if cfg.byproduct {
        let o = option(&mut rng, "l0".into());
        workshops.push(Workshop {
            id: "liner".into(),
            options: vec![o],
            location: [w as f64 - 1.0, -1.0],
            upstream_buffers: vec![format!("b{}", w - 1)],
            downstream_buffers: vec!["by".into()],
        });
    }
    let buffer = |rng: &mut ChaCha8Rng, id: String| Buffer {
        id,
        initial_stock: Some(0.0),
        transport_batch: 4.0,
        transport_time: r2(rng.random_range(0.0..0.5)),
        is_byproduct_outlet: false,
        main_output: false,
    };
    let mut buffers: Vec<Buffer> = (0..w).map(|m| buffer(&mut rng, format!("b{m}"))).collect();
    let mut fin = buffer(&mut rng, "fin".into());
    fin.main_output = true;
    buffers.push(fin);
    if cfg.byproduct {
        let mut by = buffer(&mut rng, "by".into());
        by.is_byproduct_outlet = true;
        buffers.push(by);
    }
    let energy = EnergySystem {
        bess_capacity: 10.0,
        bess_initial: 5.0,
        discharge_eff: 0.9,
        charge_eff: 0.95,
        ramp_lo: 0.0,
        ramp_hi: 3.0,
        rtp: (0..hz).map(|_| r2(rng.random_range(0.1..0.8))).collect(),
        der_output: (0..hz).map(|_| r2(rng.random_range(0.0..3.0))).collect(),
        degr_coeff: 0.01,
        sale_price_main: 3.0,
        sale_price_by: 1.5,
        equipment_rate: 1.0,
        fr_weight: 0.5,
        grid_cap: None,
    };
    let mut graph = FactoryGraph { horizon: hz, workshops, buffers, energy };

    // Plant a schedule: each workshop starts an option now and then and
    // keeps it for its minimum uptime.
    let mut planted = ScheduleDecision::idle(&graph);
    for (n, ws) in graph.workshops.iter().enumerate() {
        let mut uses = vec![0usize; ws.options.len()];
        let mut h = 0;
        while h < hz {
            if rng.random_bool(0.5) {
                let p = rng.random_range(0..ws.options.len());
                let opt = &ws.options[p];
                let run = opt.min_uptime.min(hz - h);
                if uses[p] + run <= opt.max_daily_uses {
                    for t in h..h + run {
                        planted.on[t][n][p] = true;
                    }
                    uses[p] += run;
                    h += run;
                    // A gap keeps the next start from merging with this run.
                    h += 1;
                    continue;
                }
            }
            h += 1;
        }
    }
    // Stock every buffer so the planted schedule never runs dry, plus slack.
    let nominal: Vec<Vec<Vec<f64>>> = (0..hz)
        .map(|_| graph.workshops.iter().map(|ws| ws.options.iter().map(|o| o.yield_rate).collect()).collect())
        .collect();
    let prod = production(&graph, &planted, &nominal);
    for m in 0..graph.buffers.len() {
        let mut lvl: f64 = 0.0;
        let mut low: f64 = 0.0;
        for f in &prod.flow {
            lvl += f[m];
            low = low.min(lvl);
        }
        let slack = if m < w { rng.random_range(0..=4) as f64 } else { 0.0 };
        graph.buffers[m].initial_stock = Some(r2(-low + slack).max(0.0).ceil());
    }

    // Line states: the by-product workshop running alongside each option of
    // the first workshop. States differ in workshop 0, so they never overlap.
    let liner = w;
    let states: Vec<LineState> = if cfg.idm {
        (0..cfg.options_per_workshop)
            .map(|p| LineState { id: format!("s{p}"), members: vec![OptionRef::new(0, p), OptionRef::new(liner, 0)] })
            .collect()
    } else {
        Vec::new()
    };
    let mut line_history = Vec::new();
    for st in &states {
        let ratio = r2(rng.random_range(0.2..0.8));
        for h in 0..hz {
            line_history.push(LineRecord { hour: h, state_id: st.id.clone(), count: rng.random_range(0..=4), ratio });
        }
    }

    let noisy: Vec<bool> = {
        let mut hours: Vec<usize> = (0..hz).collect();
        for i in (1..hz).rev() {
            hours.swap(i, rng.random_range(0..=i));
        }
        let mut flag = vec![false; hz];
        for &h in hours.iter().take(cfg.varying_hours) {
            flag[h] = true;
        }
        flag
    };
    let mut load_samples = Vec::with_capacity(hz);
    for &noisy_hour in &noisy {
        let mu: f64 = r2(rng.random_range(1.0..8.0));
        let samples = if noisy_hour && cfg.load_sigma > 0.0 {
            let law = Normal::new(mu, cfg.load_sigma).expect("positive sigma");
            (0..cfg.samples_per_hour).map(|_| r2(law.sample(&mut rng).max(0.0))).collect()
        } else {
            vec![mu; cfg.samples_per_hour]
        };
        load_samples.push(samples);
    }
    let rtp_profile = graph.energy.rtp.clone();

    let yields = (cfg.delta_alpha > 0.0).then(|| {
        let alpha_floor: Vec<Vec<f64>> = graph
            .workshops
            .iter()
            .map(|ws| ws.options.iter().map(|o| r2((o.yield_rate - rng.random_range(0.0..0.05)).max(0.0))).collect())
            .collect();
        let target_shop = w - 1;
        let corrected_set: Vec<OptionRef> =
            (0..cfg.options_per_workshop).map(|p| OptionRef::new(target_shop, p)).collect();
        let mut combos = Vec::new();
        if w >= 2 {
            for &target in &corrected_set {
                for p in 0..cfg.options_per_workshop {
                    combos.push(YieldCombo {
                        target,
                        members: vec![OptionRef::new(0, p)],
                        delta: r2(cfg.delta_alpha * rng.random_range(0.5..1.0)),
                    });
                }
            }
        }
        YieldAmbiguity { alpha_floor, combos, corrected_set }
    });

    let fit_spec = FitSpec {
        states,
        s: cfg.idm_s,
        gamma: cfg.idm_gamma,
        ratio_threshold: 0.0,
        gamma1: cfg.gamma1,
        gamma2: cfg.gamma2,
        epsilon: cfg.epsilon,
        drift_k: cfg.drift_k,
        drift_b: cfg.drift_b,
    };
    graph.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    Ok(SyntheticInstance {
        graph,
        history: HistoryBundle { load_samples, line_history, rtp_profile },
        fit_spec,
        yields,
        planted,
    })
}
