use proptest::prelude::*;

use super::*;
use crate::grid::build_grid_from;
use crate::hjb::{solve, SchemeConfig, Stencil};
use crate::instances::{
    diffusive_grid, diffusive_instance, frozen_grid, frozen_instance, null_instance,
};
use crate::policy::extract_policy;

fn opts(dt: f64) -> PathOptions {
    PathOptions {
        dt_sim: dt,
        mode: Mode::Strict,
        record: true,
        negate_noise: false,
    }
}

fn one_path(
    spec: &ProblemSpec,
    init: InitialState,
    c: Controller<'_>,
    mode: Mode,
) -> Result<PathOutcome> {
    let mut rng = path_stream(1, 0);
    simulate_path(spec, init, c, PathOptions { mode, ..opts(0.01) }, &mut rng)
}

#[test]
fn null_instance_trivial_cost_is_exactly_zero() {
    let spec = null_instance();
    let res = estimate_cost(
        &spec,
        InitialState::new(0.0, 0.25, 0.3),
        Controller::Trivial,
        &McConfig::new(64, 0.01, 9),
        Mode::Strict,
    )
    .unwrap();
    assert_eq!(res.mean_cost, 0.0);
    assert_eq!(res.stderr, 0.0);
    assert_eq!(res.impulse_histogram, vec![64]);
}

#[test]
fn frozen_schedule_accumulates_the_analytic_cost() {
    let spec = frozen_instance();
    let sched = ImpulseSchedule::new(&[(0.5, 1.0)]);
    let out = one_path(
        &spec,
        InitialState::new(0.0, 0.25, -1.0),
        Controller::Schedule(&sched),
        Mode::Strict,
    )
    .unwrap();
    assert!((out.cost - 0.6).abs() < 1e-12, "{}", out.cost);
    assert_eq!(out.impulses.len(), 1);
    let path = out.path.unwrap();
    let hit = path.iter().find(|p| p.impulse.is_some()).unwrap();
    assert!((hit.t - 0.5).abs() < 1e-12);
    assert_eq!(hit.r, 0.0);
}

#[test]
fn lag_violation_is_an_error_in_strict_mode_and_dropped_in_tolerant_mode() {
    let spec = frozen_instance();
    let sched = ImpulseSchedule::new(&[(0.5, 1.0), (0.6, 1.0)]);
    let init = InitialState::new(0.0, 0.25, -1.0);
    assert!(matches!(
        one_path(&spec, init, Controller::Schedule(&sched), Mode::Strict),
        Err(Error::Admissibility(_))
    ));
    let out = one_path(&spec, init, Controller::Schedule(&sched), Mode::Tolerant).unwrap();
    assert_eq!(out.impulses.len(), 1);
    assert_eq!(out.rejected.len(), 1);
    assert!((out.rejected[0].tau - 0.6).abs() < 1e-12);
}

#[test]
fn impulse_outside_the_cone_is_inadmissible() {
    let spec = frozen_instance();
    let sched = ImpulseSchedule::new(&[(0.5, -1.0)]);
    assert!(matches!(
        one_path(
            &spec,
            InitialState::new(0.0, 0.25, 1.0),
            Controller::Schedule(&sched),
            Mode::Strict
        ),
        Err(Error::Admissibility(_))
    ));
}

#[test]
fn terminal_impulses_are_exempt_and_collapse() {
    let spec = frozen_instance();
    let sched = ImpulseSchedule::new(&[(0.9, 0.5), (1.0, 0.25), (1.0, 0.25)]);
    let out = one_path(
        &spec,
        InitialState::new(0.0, 0.25, -1.0),
        Controller::Schedule(&sched),
        Mode::Strict,
    )
    .unwrap();
    assert_eq!(out.impulses.len(), 2);
    let last = out.impulses.impulses[1];
    assert_eq!(last.tau, 1.0);
    assert_eq!(last.xi, 0.5);
    assert!((out.cost - (0.1 + 0.25 + 0.1 + 0.25)).abs() < 1e-12);
}

#[test]
fn admissibility_report_examples() {
    let spec = frozen_instance();
    assert!(check_admissible(&ImpulseSchedule::default(), &spec, 0.0, 0.0).admissible);
    let early = ImpulseSchedule::new(&[(0.3 + 0.05, 1.0)]);
    let rep = check_admissible(&early, &spec, 0.3, 0.1);
    assert!(!rep.admissible);
    assert_eq!(rep.index, Some(0));
    let terminal = ImpulseSchedule::new(&[(0.9, 1.0), (1.0, 1.0)]);
    assert!(check_admissible(&terminal, &spec, 0.0, 0.25).admissible);
    let gap = ImpulseSchedule::new(&[(0.5, 1.0), (0.6, 1.0)]);
    assert_eq!(check_admissible(&gap, &spec, 0.0, 0.25).index, Some(1));
    let zero = ImpulseSchedule::new(&[(0.5, 0.0)]);
    assert!(!check_admissible(&zero, &spec, 0.0, 0.25).admissible);
}

#[test]
fn impulse_counts_respect_the_lag_bound() {
    let spec = frozen_instance();
    let field = solve(
        &spec,
        &build_grid_from(&spec, &frozen_grid()).unwrap(),
        &SchemeConfig::for_spec(&spec),
    )
    .unwrap();
    let policy = extract_policy(&field, &spec, 1e-10).unwrap();
    let res = estimate_cost(
        &spec,
        InitialState::new(0.0, 0.25, -1.5),
        Controller::Policy(&policy),
        &McConfig::new(16, 0.01, 2),
        Mode::Strict,
    )
    .unwrap();
    assert!(res.max_nonterminal_impulses <= nonterminal_impulse_bound(&spec, 0.0));
    assert!(
        (res.mean_cost - field.node(0, field.grid.m, field.grid.nearest_x(-1.5))).abs() < 1e-12
    );
}

#[test]
fn estimates_do_not_depend_on_the_thread_count() {
    let spec = diffusive_instance();
    let mc = McConfig {
        antithetic: true,
        retain_paths: 3,
        ..McConfig::new(200, 0.01, 77)
    };
    let init = InitialState::new(0.0, 0.1, 0.4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_cost(&spec, init, Controller::Trivial, &mc, Mode::Strict).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.mean_cost.to_bits(), b.mean_cost.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    assert_eq!(a.paths_csv(), b.paths_csv());
    assert_eq!(a.paths.len(), 3);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn odd_antithetic_path_count_is_rejected() {
    let mc = McConfig {
        antithetic: true,
        ..McConfig::new(3, 0.01, 0)
    };
    assert!(matches!(
        estimate_cost(
            &null_instance(),
            InitialState::new(0.0, 0.0, 0.0),
            Controller::Trivial,
            &mc,
            Mode::Strict
        ),
        Err(Error::Config { .. })
    ));
}

/// Linear backward recursion with the obstacle switched off.
fn uncontrolled_value(spec: &ProblemSpec) -> (crate::grid::Grid, Vec<f64>) {
    let grid = build_grid_from(spec, &diffusive_grid()).unwrap();
    let mut v: Vec<f64> = (0..grid.nx_nodes()).map(|i| spec.h(grid.x(i))).collect();
    let mut next = v.clone();
    for k in (0..grid.n_t).rev() {
        Stencil::new(spec, &grid, k).unwrap().apply(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    (grid, v)
}

#[test]
fn trivial_controller_matches_the_uncontrolled_equation() {
    let spec = diffusive_instance();
    let (grid, v) = uncontrolled_value(&spec);
    let mc = McConfig {
        antithetic: true,
        ..McConfig::new(10_000, grid.dt(), 5)
    };
    for x in [-1.0, 0.0, 0.6] {
        let res = estimate_cost(
            &spec,
            InitialState::new(0.0, 0.1, x),
            Controller::Trivial,
            &mc,
            Mode::Strict,
        )
        .unwrap();
        let want = v[grid.nearest_x(x)];
        assert!(
            (res.mean_cost - want).abs() <= 3.0 * res.stderr,
            "x={x}: mc {} pde {want} se {}",
            res.mean_cost,
            res.stderr
        );
    }
}

#[test]
fn dpp_on_null_and_frozen_instances_is_exact() {
    let spec = null_instance();
    let field = solve(
        &spec,
        &build_grid_from(&spec, &crate::instances::null_grid()).unwrap(),
        &SchemeConfig::for_spec(&spec),
    )
    .unwrap();
    let rep = dpp_check(
        &field,
        &spec,
        InitialState::new(0.2, 0.25, 0.5),
        0.6,
        &McConfig::new(50, 0.0025, 1),
    )
    .unwrap();
    assert_eq!((rep.residual, rep.stderr), (0.0, 0.0));

    let spec = frozen_instance();
    let field = solve(
        &spec,
        &build_grid_from(&spec, &frozen_grid()).unwrap(),
        &SchemeConfig::for_spec(&spec),
    )
    .unwrap();
    for x in [-1.0, -0.2, 0.0, 0.6] {
        let rep = dpp_check(
            &field,
            &spec,
            InitialState::new(0.2, 0.0, x),
            0.2 + 0.125,
            &McConfig::new(20, 0.0125, 3),
        )
        .unwrap();
        assert_eq!(rep.regime, DppRegime::Equality);
        assert_eq!(rep.residual, 0.0, "x={x}");
    }
}

#[test]
fn dpp_case_mismatch_names_the_case() {
    let spec = frozen_instance();
    let field = solve(
        &spec,
        &build_grid_from(&spec, &frozen_grid()).unwrap(),
        &SchemeConfig::for_spec(&spec),
    )
    .unwrap();
    match dpp_check(
        &field,
        &spec,
        InitialState::new(0.2, 0.1, 0.0),
        0.5,
        &McConfig::new(4, 0.01, 0),
    ) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("equality"), "{msg}"),
        other => panic!("{other:?}"),
    }
    match dpp_check(
        &field,
        &spec,
        InitialState::new(0.2, 0.3, 0.0),
        1.5,
        &McConfig::new(4, 0.01, 0),
    ) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("inequality"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn state_sensitivity_is_stable_under_step_refinement() {
    let spec = diffusive_instance();
    let sched = ImpulseSchedule::new(&[(0.5, -0.5)]);
    let c1 =
        state_sensitivity(&spec, 0.0, 0.0, 0.05, &sched, &McConfig::new(500, 0.01, 4)).unwrap();
    let c2 =
        state_sensitivity(&spec, 0.0, 0.0, 0.05, &sched, &McConfig::new(500, 0.005, 4)).unwrap();
    assert!(c1 >= 1.0 - 1e-12 && c2 >= 1.0 - 1e-12);
    assert!((c1 - c2).abs() / c1 < 0.1, "{c1} {c2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_costs_on_the_null_instance_pay_for_every_impulse(
        gaps in prop::collection::vec(0.25..0.5f64, 0..4),
        sizes in prop::collection::vec(prop_oneof![-2.0..-0.01f64, 0.01..2.0f64], 4),
        seed in 0u64..1000,
    ) {
        let spec = null_instance();
        let mut tau = 0.0;
        let mut pairs = Vec::new();
        for (g, xi) in gaps.iter().zip(&sizes) {
            tau += g;
            if tau > 1.0 { break; }
            pairs.push(((tau * 100.0f64).round() / 100.0, *xi));
        }
        let sched = ImpulseSchedule::new(&pairs);
        prop_assume!(check_admissible(&sched, &spec, 0.0, 0.25).admissible);
        let mut rng = path_stream(seed, 0);
        let out = simulate_path(&spec, InitialState::new(0.0, 0.25, 0.0), Controller::Schedule(&sched), opts(0.01), &mut rng).unwrap();
        prop_assert!(out.cost >= spec.ell0 * out.impulses.len() as f64 - 1e-12);
    }

    #[test]
    fn same_seed_same_result(seed in 0u64..u64::MAX, x in -1.0..1.0f64) {
        let spec = diffusive_instance();
        let mc = McConfig::new(8, 0.05, seed);
        let init = InitialState::new(0.0, 0.1, x);
        let a = estimate_cost(&spec, init, Controller::Trivial, &mc, Mode::Strict).unwrap();
        let b = estimate_cost(&spec, init, Controller::Trivial, &mc, Mode::Strict).unwrap();
        prop_assert_eq!(a, b);
    }
}
