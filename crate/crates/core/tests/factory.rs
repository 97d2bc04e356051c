use cosched_core::factory::{
    emit_constraints_with, engine_window, load_factory, schedule_assignment, simulate_schedule, EnergyDispatch,
    FactoryGraph, OptionRef, ScheduleDecision, UncertaintyRealization,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_shop(horizon: usize, options: usize, outlet: bool) -> FactoryGraph {
    let opts: Vec<String> = (0..options)
        .map(|p| {
            format!(
                r#"{{"id": "o{p}", "time_cost": {}, "energy_cost": {}, "output": 2, "input": 2, "min_uptime": {}, "max_daily_uses": 2}}"#,
                1.0 + p as f64,
                3.0 + p as f64,
                1 + p
            )
        })
        .collect();
    let opts = opts.join(",");
    let rtp: Vec<String> = (0..horizon).map(|h| format!("{}", 0.1 + 0.05 * h as f64)).collect();
    let der: Vec<String> = (0..horizon).map(|_| "2".to_string()).collect();
    let doc = format!(
        r#"{{
          "horizon": {horizon},
          "workshops": [
            {{"id": "a", "options": [{opts}], "location": [0, 0], "upstream_buffers": ["raw"], "downstream_buffers": ["mid"]}},
            {{"id": "b", "options": [{opts}], "location": [1, 0], "upstream_buffers": ["mid"], "downstream_buffers": ["{down}"]}}
          ],
          "buffers": [
            {{"id": "raw", "initial": 5, "batch": 4, "transport_time": 0.5}},
            {{"id": "mid", "initial": 1, "batch": 4, "transport_time": 0.25}},
            {{"id": "fin", "batch": 4, "transport_time": 0.5, "main_output": true}},
            {{"id": "by", "initial": 1, "batch": 4, "transport_time": 0.5, "byproduct_outlet": {outlet}}}
          ],
          "energy": {{
            "bess_capacity": 10, "bess_initial": 5, "discharge_eff": 0.9, "charge_eff": 0.95,
            "ramp_lo": 0, "ramp_hi": 3, "rtp": [{rtp}], "der_output": [{der}],
            "degr_coeff": 0.01, "sale_price_main": 3, "sale_price_by": 1.5, "fr_weight": 0.5
          }}
        }}"#,
        down = if outlet { "by" } else { "fin" },
        rtp = rtp.join(","),
        der = der.join(","),
    );
    load_factory(&doc, false).unwrap()
}

fn schedule_from_bits(g: &FactoryGraph, bits: u64) -> ScheduleDecision {
    let mut s = ScheduleDecision::idle(g);
    let mut k = 0;
    for h in 0..g.horizon {
        for n in 0..g.workshops.len() {
            for p in 0..g.workshops[n].options.len() {
                s.on[h][n][p] = bits >> k & 1 == 1;
                k += 1;
            }
        }
    }
    s
}

/// At most one option per workshop and hour, each slot busy with probability 0.3.
fn sparse_schedule(g: &FactoryGraph, rng: &mut ChaCha8Rng) -> ScheduleDecision {
    let mut s = ScheduleDecision::idle(g);
    for h in 0..g.horizon {
        for (n, w) in g.workshops.iter().enumerate() {
            if rng.random_bool(0.3) {
                s.on[h][n][rng.random_range(0..w.options.len())] = true;
            }
        }
    }
    s
}

fn realization(g: &FactoryGraph, rng: &mut ChaCha8Rng) -> UncertaintyRealization {
    let mut r = UncertaintyRealization::nominal(g);
    for hour in &mut r.yields {
        for w in hour {
            for y in w {
                *y = rng.random_range(0.6..=1.0);
            }
        }
    }
    r.expected_load = (0..g.horizon).map(|_| rng.random_range(0.0..6.0)).collect();
    r.zeta = (0..g.horizon).map(|_| rng.random_range(0.0..=1.0)).collect();
    r
}

/// Dispatch that covers the deviation exactly and uses a little DER and storage.
fn dispatch_for(g: &FactoryGraph, s: &ScheduleDecision, r: &UncertaintyRealization) -> EnergyDispatch {
    let mut d = EnergyDispatch::zero(g.horizon);
    for h in 0..g.horizon {
        let e: f64 = s.triplets().iter().filter(|t| t.0 == h).map(|&(_, n, p)| g.workshops[n].options[p].energy_cost).sum();
        d.e_lu[h] = e.min(1.0);
        d.e_su[h] = 0.5;
        d.e_eu[h] = (e - d.e_lu[h]).min(0.5);
        d.e_fr[h] = (e - d.e_lu[h] - d.e_eu[h] - r.expected_load[h]).abs();
    }
    d
}

#[test]
fn idle_schedule_costs_nothing_and_keeps_stock() {
    let g = two_shop(3, 2, true);
    let s = ScheduleDecision::idle(&g);
    let r = UncertaintyRealization::nominal(&g);
    let rep = simulate_schedule(&g, &s, &EnergyDispatch::zero(3), &r).unwrap();
    assert_eq!(rep.equipment_cost, 0.0);
    for level in &rep.hourly.buffers {
        assert_eq!(level, &rep.hourly.buffers[0]);
    }
    assert_eq!(rep.hourly.buffers[0], vec![5.0, 1.0, 0.0, 1.0]);
}

#[test]
fn single_firing_moves_output_downstream() {
    let g = two_shop(2, 1, false);
    let mut s = ScheduleDecision::idle(&g);
    s.on[0][0][0] = true;
    let mut r = UncertaintyRealization::nominal(&g);
    r.yields[0][0][0] = 1.0;
    let rep = simulate_schedule(&g, &s, &EnergyDispatch { e_fr: vec![3.0, 0.0], ..EnergyDispatch::zero(2) }, &r).unwrap();
    assert_eq!(rep.hourly.buffers[1][1] - rep.hourly.buffers[0][1], g.workshops[0].options[0].output_qty);
    assert_eq!(rep.hourly.buffers[1][0] - rep.hourly.buffers[0][0], -g.workshops[0].options[0].input_qty);
}

/// Independent term-by-term cost evaluation.
fn reference_objective(g: &FactoryGraph, s: &ScheduleDecision, d: &EnergyDispatch, r: &UncertaintyRealization) -> f64 {
    let e = &g.energy;
    let nb = g.buffers.len();
    let mut stock: Vec<f64> = (0..nb).map(|m| g.buffers[m].initial_stock.unwrap_or(if m == 0 { 100.0 } else { 0.0 })).collect();
    let mut soc = e.bess_initial;
    let mut total = 0.0;
    for h in 0..g.horizon {
        let mut delta = vec![0.0; nb];
        let mut energy = 0.0;
        for (n, w) in g.workshops.iter().enumerate() {
            for (p, o) in w.options.iter().enumerate() {
                if !s.on[h][n][p] {
                    continue;
                }
                total += e.equipment_rate * o.time_cost;
                energy += o.energy_cost;
                for m in 0..nb {
                    if w.downstream_buffers.contains(&g.buffers[m].id) {
                        delta[m] += o.output_qty * r.yields[h][n][p];
                    }
                    if w.upstream_buffers.contains(&g.buffers[m].id) {
                        delta[m] -= o.input_qty;
                    }
                }
            }
        }
        for m in 0..nb {
            total += e.equipment_rate * delta[m].abs() * g.buffers[m].transport_time / g.buffers[m].transport_batch;
            stock[m] += delta[m];
            if g.buffers[m].is_byproduct_outlet {
                stock[m] -= s.byproduct_sales[h];
            }
        }
        total -= e.sale_price_by * r.zeta[h] * s.byproduct_sales[h];
        total += e.rtp[h] * (energy - d.e_eu[h] - d.e_lu[h]);
        total += e.fr_weight * d.e_fr[h];
        soc += e.charge_eff * d.e_su[h] - e.discharge_eff * d.e_eu[h];
        total += e.degr_coeff * soc;
    }
    let main = g.buffers.iter().position(|b| b.main_output).unwrap();
    total - e.sale_price_main * stock[main]
}

#[test]
fn random_feasible_schedules_match_reference_costs() {
    let g = two_shop(4, 2, true);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..400 {
        let mut s = sparse_schedule(&g, &mut rng);
        let r = realization(&g, &mut rng);
        s.byproduct_sales = (0..4).map(|_| rng.random_range(0.0..0.5)).collect();
        let d = dispatch_for(&g, &s, &r);
        let res = simulate_schedule(&g, &s, &d, &r);
        if let Ok(rep) = res {
            let want = reference_objective(&g, &s, &d, &r);
            assert!((rep.objective - want).abs() < 1e-9, "{} vs {want}", rep.objective);
            checked += 1;
        }
    }
    assert!(checked > 20, "only {checked} feasible samples");
}

#[test]
fn min_uptime_rows_match_run_lengths() {
    let doc = r#"{
      "horizon": 5,
      "workshops": [{"id": "w", "options": [{"id": "o", "time_cost": 1, "energy_cost": 0, "output": 0, "input": 0, "min_uptime": 3, "max_daily_uses": 5}],
        "location": [0, 0], "upstream_buffers": ["b"], "downstream_buffers": ["b"]}],
      "buffers": [{"id": "b", "batch": 1, "transport_time": 0}],
      "energy": {"bess_capacity": 1, "bess_initial": 0, "discharge_eff": 1, "charge_eff": 1, "ramp_lo": 0, "ramp_hi": 1,
        "rtp": [0,0,0,0,0], "der_output": [0,0,0,0,0], "degr_coeff": 0, "sale_price_main": 0, "sale_price_by": 0}
    }"#;
    let g = load_factory(doc, false).unwrap();
    let r = UncertaintyRealization::nominal(&g);
    let set = emit_constraints_with(&g, &r);
    let rows = &set.block("min_uptime").unwrap().rows;
    for bits in 0..32u32 {
        let on: Vec<bool> = (0..5).map(|h| bits >> h & 1 == 1).collect();
        // A run is fine if it lasts 3 hours or reaches the end of the day.
        let mut ok = true;
        let mut h = 0;
        while h < 5 {
            if on[h] {
                let start = h;
                while h < 5 && on[h] {
                    h += 1;
                }
                ok &= h - start >= 3 || h == 5;
            } else {
                h += 1;
            }
        }
        let vals: Vec<f64> = (0..set.model.num_vars())
            .map(|i| {
                let name = &set.model.variables[i].name;
                (0..5).find(|h| name == &format!("I[{h}][0][0]")).map_or(0.0, |h| on[h] as u8 as f64)
            })
            .collect();
        let rows_ok = rows.iter().all(|&i| {
            let c = &set.model.constraints[i];
            c.relation.holds(c.activity(&vals), c.rhs, 1e-9)
        });
        assert_eq!(rows_ok, ok, "{on:?}");
    }
}

fn soundness_sweep(g: &FactoryGraph, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = g.num_first_stage_binaries();
    let mut accepted = 0;
    for mask in 0..1u64 << bits {
        let r = realization(g, &mut rng);
        let mut s = schedule_from_bits(g, mask);
        if g.outlet().is_some() {
            s.byproduct_sales = (0..g.horizon).map(|_| rng.random_range(0.0..1.5)).collect();
        }
        let d = dispatch_for(g, &s, &r);
        let set = emit_constraints_with(g, &r);
        let vals = schedule_assignment(&set, g, &s, &d, &r);
        let rows_ok = set.model.max_violation(&vals) <= 1e-7;
        let sim = simulate_schedule(g, &s, &d, &r);
        assert_eq!(rows_ok, sim.is_ok(), "mask {mask:b}: {:?} vs {:?}", set.violated_blocks(&vals, 1e-7), sim.err());
        if let Ok(rep) = sim {
            accepted += 1;
            assert!((set.model.objective.expr.eval(&vals) - rep.objective).abs() < 1e-9);
        }
    }
    assert!(accepted > 0);
}

#[test]
fn constraint_rows_agree_with_simulator_two_options() {
    soundness_sweep(&two_shop(3, 2, true), 1);
}

#[test]
fn constraint_rows_agree_with_simulator_four_hours() {
    soundness_sweep(&two_shop(4, 1, false), 2);
    soundness_sweep(&two_shop(4, 1, true), 3);
}

#[test]
fn engine_window_idle_is_feasible() {
    let g = engine_window(3);
    let r = UncertaintyRealization::nominal(&g);
    let rep = simulate_schedule(&g, &ScheduleDecision::idle(&g), &EnergyDispatch::zero(3), &r).unwrap();
    assert_eq!(rep.equipment_cost, 0.0);
    assert_eq!(rep.main_revenue, 0.0);
}

proptest! {
    #[test]
    fn simulated_trajectories_obey_balances(seed in 0u64..100_000) {
        let g = two_shop(4, 2, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Resample until the simulator accepts the plan.
        let (s, r, d, rep) = loop {
            let r = realization(&g, &mut rng);
            let mut s = sparse_schedule(&g, &mut rng);
            s.byproduct_sales = (0..4).map(|_| rng.random_range(0.0..0.5)).collect();
            let d = dispatch_for(&g, &s, &r);
            if let Ok(rep) = simulate_schedule(&g, &s, &d, &r) {
                break (s, r, d, rep);
            }
        };
        let e = &g.energy;
        let outlet = g.outlet().unwrap();
        for h in 0..4 {
            for m in 0..g.buffers.len() {
                let mut flow = 0.0;
                for n in g.producers(m) {
                    for p in 0..2 {
                        if s.is_on(h, OptionRef::new(n, p)) {
                            flow += g.workshops[n].options[p].output_qty * r.yields[h][n][p];
                        }
                    }
                }
                for n in g.consumers(m) {
                    for p in 0..2 {
                        if s.is_on(h, OptionRef::new(n, p)) {
                            flow -= g.workshops[n].options[p].input_qty;
                        }
                    }
                }
                if m == outlet {
                    flow -= s.byproduct_sales[h];
                }
                let step = rep.hourly.buffers[h + 1][m] - rep.hourly.buffers[h][m];
                prop_assert!((step - flow).abs() < 1e-12);
            }
            prop_assert_eq!(rep.hourly.net_purchase[h], rep.hourly.energy[h] - d.e_eu[h] - d.e_lu[h]);
            let soc = rep.hourly.soc[h] - e.discharge_eff * d.e_eu[h] + e.charge_eff * d.e_su[h];
            prop_assert_eq!(rep.hourly.soc[h + 1], soc);
        }
        let sum = rep.equipment_cost + rep.degradation_cost + rep.purchase_cost + rep.fr_penalty - rep.main_revenue - rep.by_revenue;
        prop_assert!((rep.objective - sum).abs() < 1e-9);
    }
}
