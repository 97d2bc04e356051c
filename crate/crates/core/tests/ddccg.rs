use cosched_core::ddccg::{
    add_cuts, build_master, exhaustive_oracle, first_stage_cost, first_stage_points, run, run_split, solve_sp_oracle,
    split_problem, tighten_wx, wx_values, without_ddu, CornerMode, CutKind, CutPool, DdccgError, DduEntry,
    OracleOptions, ProblemSplit, RunOptions, SpStatus, ZetaMode,
};
use cosched_core::ddu::{idm_interval, DduSpec, FrMomentModel, Stage};
use cosched_core::factory::{
    emit_constraints_with, simulate_schedule, FactoryGraph, ScheduleDecision, UncertaintyRealization,
};
use cosched_core::optkernel::{solve_milp, OptModel, SolveStatus};
use cosched_core::scenario::{gen_synthetic, SyntheticConfig, SyntheticInstance};
use cosched_core::Parallelism;

fn small(seed: u64) -> SyntheticInstance {
    gen_synthetic(&SyntheticConfig { seed, ..Default::default() }).unwrap()
}

fn split_of(inst: &SyntheticInstance) -> ProblemSplit {
    split_problem(&inst.graph, &inst.entries().unwrap()).unwrap()
}

fn fr_model(h: usize, mu: f64, sigma: f64) -> FrMomentModel {
    FrMomentModel {
        mu: vec![mu; h],
        sigma: vec![sigma; h],
        drift_k: 0.0,
        drift_b: 0.0,
        gamma1: 0.5,
        gamma2: 1.0,
        epsilon: 0.1,
        samples_per_hour: 10,
    }
}

/// Solves the full factory model with the binaries pinned to `x` and the
/// uncertainty fixed; an independent route to one recourse value.
fn pinned_factory_objective(g: &FactoryGraph, x: &ScheduleDecision, real: &UncertaintyRealization) -> Option<f64> {
    let mut set = emit_constraints_with(g, real);
    pin(&mut set.model, x);
    let sol = solve_milp(&set.model).unwrap();
    (sol.status == SolveStatus::Optimal).then_some(sol.objective_value)
}

fn pin(model: &mut OptModel, x: &ScheduleDecision) {
    for (h, n, p) in all_slots(x) {
        let id = model.var_id(&format!("I[{h}][{n}][{p}]")).unwrap();
        let v = if x.on[h][n][p] { 1.0 } else { 0.0 };
        model.variables[id.0].lower = v;
        model.variables[id.0].upper = v;
    }
}

fn all_slots(x: &ScheduleDecision) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (h, hour) in x.on.iter().enumerate() {
        for (n, w) in hour.iter().enumerate() {
            for p in 0..w.len() {
                out.push((h, n, p));
            }
        }
    }
    out
}

#[test]
fn split_assigns_models_to_stages() {
    let inst = small(1);
    let split = split_of(&inst);
    assert_eq!(split.wx_specs.len(), 2);
    assert!(split.wy_spec.is_some());
    assert_eq!(split.x_vars.len(), inst.graph.num_first_stage_binaries());
    assert!(split.y_vars.iter().any(|v| v == "E_EU[0]"));
    assert!(split.y_vars.iter().any(|v| v.starts_with("B_ss")));

    let bare = split_problem(&inst.graph, &[]).unwrap();
    assert!(bare.is_deterministic().unwrap());
    assert!(bare.wx_specs.is_empty() && bare.wy_spec.is_none());
}

#[test]
fn split_rejects_bad_couplings() {
    let inst = small(2);
    let fr = DduSpec::FrMoment(fr_model(inst.graph.horizon, 3.0, 1.0));
    let yields = DduSpec::Yield(inst.yields.clone().unwrap());
    let both = DduEntry { spec: yields.clone(), couples: Some(vec![Stage::First, Stage::Second]) };
    assert!(matches!(split_problem(&inst.graph, &[both]), Err(DdccgError::Split(_))));
    let wrong = DduEntry { spec: yields.clone(), couples: Some(vec![Stage::Second]) };
    assert!(matches!(split_problem(&inst.graph, &[wrong]), Err(DdccgError::Split(_))));
    let twice: Vec<DduEntry> = vec![fr.clone().into(), fr.into()];
    assert!(matches!(split_problem(&inst.graph, &twice), Err(DdccgError::Split(_))));
    let short = DduSpec::FrMoment(fr_model(inst.graph.horizon + 1, 3.0, 1.0));
    assert!(matches!(split_problem(&inst.graph, &[short.into()]), Err(DdccgError::Split(_))));
    let mut g = inst.graph.clone();
    g.energy.ramp_lo = 0.5;
    assert!(matches!(split_problem(&g, &[]), Err(DdccgError::Split(_))));
}

#[test]
fn master_rows_follow_the_pool() {
    let split = split_of(&small(3));
    let empty = build_master(&split, &CutPool::default(), ZetaMode::Adversarial).unwrap();
    assert!(empty.psi_rows.is_empty() && empty.copies.is_empty());

    let u: Vec<f64> = split.load_box().unwrap().iter().map(|b| b.1).collect();
    let mut pool = CutPool::default();
    let sp = cosched_core::ddccg::SpResult {
        status: SpStatus::Optimal,
        value: 0.0,
        u_star: u.clone(),
        y_star: None,
        scenarios: vec![],
        heuristic: false,
    };
    assert_eq!(add_cuts(&mut pool, &sp, 1), CutKind::Optimality);
    let one = build_master(&split, &pool, ZetaMode::Adversarial).unwrap();
    assert_eq!(one.psi_rows.len(), 1);
    assert_eq!(one.copies.len(), 1);
    assert!(one.model.var_id("E_EU[0]@1").is_some());
    assert!(one.model.constraints.iter().filter(|c| c.name.starts_with("psi_cut")).count() == 1);

    let infeasible = cosched_core::ddccg::SpResult { status: SpStatus::Infeasible, value: f64::INFINITY, ..sp };
    assert_eq!(add_cuts(&mut pool, &infeasible, 2), CutKind::Feasibility);
    let two = build_master(&split, &pool, ZetaMode::Adversarial).unwrap();
    assert_eq!(two.psi_rows.len(), 1);
    assert_eq!(two.copies.len(), 2);
    assert!(two.model.var_id("E_LU[0]@2").is_some());
    assert_eq!(pool.optimality_count(), 1);
}

#[test]
fn empty_pool_bound_is_below_the_optimum() {
    for seed in 0..5 {
        let split = split_of(&small(seed));
        let oracle = exhaustive_oracle(&split, ZetaMode::Adversarial, Parallelism::Parallel).unwrap();
        let mp = build_master(&split, &CutPool::default(), ZetaMode::Adversarial).unwrap();
        let sol = solve_milp(&mp.model).unwrap();
        assert!(sol.objective_value <= oracle.objective + 1e-9);
    }
}

#[test]
fn matches_exhaustive_oracle_and_bounds_behave() {
    for seed in 0..15 {
        let inst = small(seed);
        let split = split_of(&inst);
        let oracle = exhaustive_oracle(&split, ZetaMode::Adversarial, Parallelism::Parallel).unwrap();
        let (co, trace) = run_split(split, &RunOptions::default()).unwrap();
        assert!((co.objective - oracle.objective).abs() <= 1e-5, "seed {seed}: {} vs {}", co.objective, oracle.objective);
        assert!(co.gap <= 1e-4);
        assert!(trace.converged);
        for w in trace.records.windows(2) {
            assert!(w[1].lb >= w[0].lb - 1e-9, "seed {seed}: lb fell");
            assert!(w[1].ub <= w[0].ub + 1e-9, "seed {seed}: ub rose");
        }
        for r in &trace.records {
            if r.ub.is_finite() {
                assert!(r.lb <= r.ub + 1e-4);
            }
        }
        assert!(trace.cuts <= oracle.recourse_feasible_points * oracle.corners);
        let jsonl = trace.to_jsonl();
        assert_eq!(jsonl.lines().count(), trace.records.len());
        for key in ["\"k\"", "\"lb\"", "\"ub\"", "\"gap\"", "\"sp_status\"", "\"cut_kind\"", "\"elapsed_ms\""] {
            assert!(jsonl.lines().next().unwrap().contains(key));
        }
    }
}

#[test]
fn larger_shapes_match_the_oracle() {
    let shapes = [(3, 1, 3, true), (2, 2, 2, false), (1, 2, 4, true), (2, 1, 4, true)];
    for (i, &(workshops, options, horizon, byproduct)) in shapes.iter().enumerate() {
        let cfg = SyntheticConfig {
            seed: 40 + i as u64,
            workshops,
            options_per_workshop: options,
            horizon,
            byproduct,
            idm: byproduct,
            ..Default::default()
        };
        let inst = gen_synthetic(&cfg).unwrap();
        let split = split_of(&inst);
        let oracle = exhaustive_oracle(&split, ZetaMode::Adversarial, Parallelism::Parallel).unwrap();
        let (co, _) = run_split(split, &RunOptions::default()).unwrap();
        assert!((co.objective - oracle.objective).abs() <= 1e-5, "{cfg:?}");
    }
}

#[test]
fn deterministic_instance_equals_single_milp() {
    for seed in 0..6 {
        let inst = gen_synthetic(&SyntheticConfig { seed, ..Default::default() }.zero_intensity()).unwrap();
        let entries = inst.entries().unwrap();
        let split = split_problem(&inst.graph, &entries).unwrap();
        assert!(split.load_box().unwrap().iter().all(|b| b.0 == b.1));
        let (co, trace) = run_split(split.clone(), &RunOptions::default()).unwrap();
        assert!(trace.cuts <= 2, "{} cuts", trace.cuts);

        let mut real = UncertaintyRealization::nominal(&inst.graph);
        real.expected_load = split.wy_spec.as_ref().unwrap().mu.clone();
        let sol = solve_milp(&emit_constraints_with(&inst.graph, &real).model).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((co.objective - sol.objective_value).abs() <= 1e-6, "seed {seed}: {} vs {}", co.objective, sol.objective_value);
        let oracle = exhaustive_oracle(&split, ZetaMode::Adversarial, Parallelism::Sequential).unwrap();
        assert!((oracle.objective - sol.objective_value).abs() <= 1e-6);
    }
}

#[test]
fn oracle_corners_match_pinned_factory_model() {
    let inst = small(6);
    let split = split_of(&inst);
    assert_eq!(split.load_box().unwrap().iter().filter(|b| b.1 > b.0).count(), 2);
    for (x, wx) in first_stage_points(&split, ZetaMode::Adversarial).unwrap().into_iter().take(25) {
        let sp = solve_sp_oracle(&split, &x, &wx, &OracleOptions::default()).unwrap();
        if sp.status != SpStatus::Optimal {
            continue;
        }
        assert_eq!(sp.scenarios.len(), 4);
        let fsc = first_stage_cost(&split.graph, &x, &wx.alpha);
        let mut worst = f64::NEG_INFINITY;
        for s in &sp.scenarios {
            let real = UncertaintyRealization {
                yields: wx.alpha.clone(),
                expected_load: s.expected_load.clone(),
                zeta: wx.zeta.clone(),
            };
            let full = pinned_factory_objective(&split.graph, &x, &real).unwrap();
            assert!((full - fsc - s.value).abs() <= 1e-6, "{full} - {fsc} vs {}", s.value);
            worst = worst.max(s.value);
        }
        assert_eq!(sp.value, worst);
    }
}

#[test]
fn zero_width_box_is_one_scenario() {
    let inst = gen_synthetic(&SyntheticConfig { seed: 8, gamma1: 0.0, gamma2: 0.0, ..Default::default() }).unwrap();
    let split = split_of(&inst);
    let (x, wx) = first_stage_points(&split, ZetaMode::Adversarial).unwrap().pop().unwrap();
    let sp = solve_sp_oracle(&split, &x, &wx, &OracleOptions::default()).unwrap();
    assert_eq!(sp.scenarios.len(), 1);
    let real = UncertaintyRealization {
        yields: wx.alpha.clone(),
        expected_load: split.wy_spec.as_ref().unwrap().mu.clone(),
        zeta: wx.zeta.clone(),
    };
    let full = pinned_factory_objective(&split.graph, &x, &real).unwrap();
    assert!((full - first_stage_cost(&split.graph, &x, &wx.alpha) - sp.value).abs() <= 1e-6);
}

#[test]
fn grid_cap_triggers_feasibility_cuts() {
    let mut found_cut = false;
    for seed in 0..10 {
        let mut inst = small(seed);
        inst.graph.energy.grid_cap = Some(vec![2.0; inst.graph.horizon]);
        let split = split_of(&inst);
        let busy = first_stage_points(&split, ZetaMode::Adversarial)
            .unwrap()
            .into_iter()
            .max_by_key(|(x, _)| x.triplets().len())
            .unwrap();
        let sp = solve_sp_oracle(&split, &busy.0, &busy.1, &OracleOptions::default()).unwrap();
        if sp.status == SpStatus::Infeasible {
            assert!(sp.value.is_infinite());
        }
        let oracle = exhaustive_oracle(&split, ZetaMode::Adversarial, Parallelism::Parallel).unwrap();
        let (co, trace) = run_split(split, &RunOptions::default()).unwrap();
        assert!((co.objective - oracle.objective).abs() <= 1e-5, "seed {seed}");
        found_cut |= trace.records.iter().any(|r| r.cut_kind == Some(CutKind::Feasibility));
    }
    assert!(found_cut, "no instance needed a feasibility cut");
}

#[test]
fn tightening_narrows_bands_and_picks_the_worse_endpoint() {
    let inst = small(4);
    let mut split = split_of(&inst);
    let idm = split.idm().unwrap().clone();
    // A schedule that keeps the by-product workshop and workshop 0 busy.
    let mut x = ScheduleDecision::idle(&split.graph);
    let liner = split.graph.workshops.len() - 1;
    for h in 0..split.graph.horizon {
        x.on[h][0][0] = true;
        x.on[h][liner][0] = true;
    }
    let before = idm_interval(&idm, 0, 0).unwrap();
    let wx = tighten_wx(&mut split, &x, ZetaMode::Adversarial).unwrap();
    let after = idm_interval(split.idm().unwrap(), 0, 0).unwrap();
    assert_eq!(split.idm().unwrap().rt_counts[0][0], 1);
    assert!(after.width() < before.width(), "{} !< {}", after.width(), before.width());
    assert_eq!(wx, wx_values(&split_of(&inst), &x, ZetaMode::Adversarial).unwrap());

    // Both endpoints through the oracle: the chosen one is the worse.
    let mut at_hi = wx.clone();
    for h in 0..split.graph.horizon {
        let band = idm_interval(split.idm().unwrap(), h, 0).unwrap();
        assert_eq!(wx.zeta[h], idm.ratios[0] * band.lo);
        at_hi.zeta[h] = idm.ratios[0] * band.hi;
    }
    let opts = OracleOptions::default();
    let lo_val = solve_sp_oracle(&split, &x, &wx, &opts).unwrap().value;
    let hi_val = solve_sp_oracle(&split, &x, &at_hi, &opts).unwrap().value;
    assert!(lo_val >= hi_val);
    assert_eq!(lo_val, lo_val.max(hi_val));
}

#[test]
fn idle_schedule_keeps_floor_yields() {
    let split = split_of(&small(5));
    let x = ScheduleDecision::idle(&split.graph);
    let wx = wx_values(&split, &x, ZetaMode::Adversarial).unwrap();
    let y = split.yields().unwrap();
    for o in &y.corrected_set {
        assert_eq!(wx.alpha[0][o.workshop][o.option], y.floor(*o));
    }
    assert!(wx.zeta.iter().all(|&z| z == 0.0));
}

#[test]
fn final_schedule_survives_every_scenario() {
    for seed in 0..8 {
        let inst = small(seed);
        let (co, _) = run(&inst.graph, &inst.entries().unwrap(), &RunOptions::default()).unwrap();
        assert!(!co.dispatch_policy.is_empty());
        for s in &co.dispatch_policy {
            let mut sched = co.schedule.clone();
            sched.byproduct_sales = s.byproduct_sales.clone();
            let real = UncertaintyRealization {
                yields: co.wx.alpha.clone(),
                expected_load: s.expected_load.clone(),
                zeta: co.wx.zeta.clone(),
            };
            let rep = simulate_schedule(&inst.graph, &sched, &s.dispatch, &real).unwrap();
            assert!((rep.objective - co.first_stage_cost - s.value).abs() <= 1e-6, "seed {seed}");
        }
    }
}

#[test]
fn cuts_never_exclude_the_brute_force_optimum() {
    for seed in 0..6 {
        let inst = small(seed);
        let split = split_of(&inst);
        let oracle = exhaustive_oracle(&split, ZetaMode::Adversarial, Parallelism::Parallel).unwrap();
        let (_, trace) = run_split(split.clone(), &RunOptions::default()).unwrap();
        let mut pool = CutPool::default();
        for r in trace.records.iter().filter(|r| r.cut_kind.is_some()) {
            let sp = cosched_core::ddccg::SpResult {
                status: r.sp_status,
                value: r.sp_value,
                u_star: r.u_star.clone(),
                y_star: None,
                scenarios: vec![],
                heuristic: false,
            };
            add_cuts(&mut pool, &sp, r.k);
        }
        let mut mp = build_master(&split, &pool, ZetaMode::Adversarial).unwrap();
        pin(&mut mp.model, &oracle.schedule);
        let sol = solve_milp(&mp.model).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}: the optimum was cut off");
        assert!(sol.objective_value <= oracle.objective + 1e-6);
        // The closing master bound meets the optimum.
        let free = solve_milp(&build_master(&split, &pool, ZetaMode::Adversarial).unwrap().model).unwrap();
        assert!(free.objective_value >= oracle.objective - 1e-4);
    }
}

#[test]
fn iteration_limit_returns_incumbent_and_trace() {
    let inst = small(2);
    let opts = RunOptions { max_iters: 0, ..Default::default() };
    match run(&inst.graph, &inst.entries().unwrap(), &opts) {
        Err(DdccgError::IterationLimitExceeded { incumbent, trace }) => {
            assert_eq!(trace.cuts, 0);
            assert_eq!(trace.records.len(), 1);
            assert!(incumbent.is_some());
        }
        other => panic!("expected the iteration limit, got {other:?}"),
    }
}

#[test]
fn greedy_corners_are_flagged() {
    let split = split_of(&small(9));
    let (x, wx) = first_stage_points(&split, ZetaMode::Adversarial).unwrap().remove(0);
    let exact = solve_sp_oracle(&split, &x, &wx, &OracleOptions::default()).unwrap();
    let greedy =
        solve_sp_oracle(&split, &x, &wx, &OracleOptions { corners: CornerMode::Greedy, ..Default::default() }).unwrap();
    assert!(!exact.heuristic && greedy.heuristic);
    assert!(greedy.value <= exact.value + 1e-9);
}

#[test]
fn parallel_and_sequential_agree() {
    let inst = small(11);
    let entries = inst.entries().unwrap();
    let par = run(&inst.graph, &entries, &RunOptions::default()).unwrap();
    let seq = run(&inst.graph, &entries, &RunOptions { parallelism: Parallelism::Sequential, ..Default::default() }).unwrap();
    assert_eq!(par.0.objective, seq.0.objective);
    assert_eq!(par.0.schedule, seq.0.schedule);
    assert_eq!(par.1.cuts, seq.1.cuts);
}

#[test]
fn no_ddu_variant_drops_the_first_stage_sets() {
    let inst = small(12);
    let entries = without_ddu(&inst.entries().unwrap());
    let split = split_problem(&inst.graph, &entries).unwrap();
    assert!(split.yields().is_none());
    assert!(split.idm().is_some());
    assert!(split.load_box().unwrap().iter().all(|b| b.0 == b.1));
    let opts = RunOptions { zeta: ZetaMode::PosteriorMean, ..Default::default() };
    let (co, _) = run_split(split.clone(), &opts).unwrap();
    let oracle = exhaustive_oracle(&split, ZetaMode::PosteriorMean, Parallelism::Parallel).unwrap();
    assert!((co.objective - oracle.objective).abs() <= 1e-5);
}
