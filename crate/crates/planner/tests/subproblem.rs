use irs_uav::experiment::{run_variant, RunSettings};
use irs_uav::ClarabelSolver;
use irs_uav_core::conic::{ConicSolver, SolveStatus, DEFAULT_TOL};
use irs_uav_core::rate::RateModel;
use irs_uav_core::sca::{build_subproblem, LocalPoint};
use irs_uav_core::scenario::default_scenario;
use irs_uav_core::trajectory::{initial_plan, Variant};
use irs_uav_core::Vec2;

#[test]
fn epigraphs_are_tight_at_the_optimum() {
    let solver = ClarabelSolver::default();
    for q in [0.0, 1e8, 1e9] {
        let cfg = default_scenario().with_uniform_demand(q);
        let model = RateModel::new(&cfg);
        for v in [Variant::MimuGeneral, Variant::MimuMatching, Variant::NoIrs] {
            let mode = v.service(cfg.n_irss());
            let seed = initial_plan(&cfg, &model, &mode, None).unwrap();
            let local = LocalPoint::from_trajectory(&cfg, &model, &mode, &seed);
            let sub = build_subproblem(&cfg, &model, &mode, &local).unwrap();
            let rep = solver.solve(&sub.program, DEFAULT_TOL);
            assert_eq!(rep.status, SolveStatus::Optimal, "{v} at {q}");
            let mut x = rep.x.clone();
            sub.polish(&mut x);
            let gap = sub.epigraph_gap(&x);
            assert!(gap <= 1e-5, "{v} at {q}: epigraph gap {gap}");
            let prog = &sub.program;
            let (a, b) = (prog.objective_value(&x), prog.objective_value(&rep.x));
            assert!(a <= b + 1e-6 * b.abs(), "{v} at {q}: {a} > {b}");
            assert!(prog.objective_value(&x) <= prog.objective_value(&sub.anchor) * (1.0 + 1e-6));
            let raw = prog.max_violation(&rep.x);
            let polished = prog.max_violation(&x);
            assert!(polished <= raw.max(1e-9), "{v} at {q}: {polished} > {raw}");
            assert_eq!(sub.trajectory(&x), sub.trajectory(&rep.x));
        }
    }
}

#[test]
fn sisu_is_general_with_one_irs_and_one_ue() {
    let mut cfg = default_scenario().with_uniform_demand(5e8);
    cfg.irss.truncate(1);
    cfg.ues.truncate(1);
    cfg.ues[0].xy_m = Vec2::new(40.0, 70.0);
    cfg.irss[0].xy_m = Vec2::new(36.0, 67.0);
    let s = RunSettings::default();
    let a = run_variant(&cfg, Variant::Sisu, &s).unwrap();
    let b = run_variant(&cfg, Variant::MimuGeneral, &s).unwrap();
    assert_eq!(a.solution().trajectory, b.solution().trajectory);
    assert_eq!(a.solution().energy, b.solution().energy);
}

#[test]
fn delivered_data_meets_demand_plus_margin() {
    let cfg = default_scenario().with_uniform_demand(3e9);
    let s = RunSettings {
        margin_bits: Some(2e7),
        ..RunSettings::default()
    };
    for v in [
        Variant::MimuGeneral,
        Variant::MimuMatching,
        Variant::NoIrs,
        Variant::Heuristic,
    ] {
        let out = run_variant(&cfg, v, &s).unwrap();
        for b in &out.solution().delivered_bits {
            assert!(*b >= 3e9 + 2e7, "{v}: {b}");
        }
    }
}

#[test]
fn heuristic_does_not_beat_joint_optimisation_at_tiny_demand() {
    let cfg = default_scenario().with_uniform_demand(1e6);
    let s = RunSettings::default();
    let h = run_variant(&cfg, Variant::Heuristic, &s).unwrap().total_j();
    let g = run_variant(&cfg, Variant::MimuGeneral, &s)
        .unwrap()
        .total_j();
    assert!(h >= g * (1.0 - 1e-6), "heuristic {h} J below SCA {g} J");
}
