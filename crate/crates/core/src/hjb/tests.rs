use super::*;
use crate::grid::{build_grid, build_grid_from};
use crate::instances::{
    diffusive_grid, diffusive_instance, frozen_grid, frozen_instance, lattice_grid,
    lattice_instance, null_grid, null_instance,
};
use crate::model::ProblemSpec;

fn solved(spec: &ProblemSpec, g: &crate::grid::GridSpec) -> ValueField {
    let grid = build_grid_from(spec, g).unwrap();
    solve(spec, &grid, &SchemeConfig::for_spec(spec)).unwrap()
}

/// `min{|x|, min_{xi >= 0} |x + xi| + 0.1 + 0.5 xi}` by brute force over a
/// fine impulse grid.
fn frozen_oracle(x: f64) -> f64 {
    let mut best = x.abs();
    for n in 1..=40_000 {
        let xi = n as f64 * 1e-4;
        best = best.min((x + xi).abs() + 0.1 + 0.5 * xi);
    }
    best
}

#[test]
fn null_instance_solves_to_zero_with_zero_residual() {
    let field = solved(&null_instance(), &null_grid());
    assert_eq!(field.grid.m, 100);
    assert!(field.sup_norm() <= 1e-10);
    let report = residuals(&field, &null_instance()).unwrap();
    assert_eq!(report.pde_residual_sup, 0.0);
    assert_eq!(report.obstacle_violation_sup, 0.0);
    assert_eq!(report.active_fraction, 0.0);
}

#[test]
fn frozen_instance_matches_the_terminal_minimization() {
    let spec = frozen_instance();
    let field = solved(&spec, &frozen_grid());
    let g = field.grid;
    let tol = 2.0 * g.dx();
    let oracle: Vec<f64> = (0..=g.n_x).map(|i| frozen_oracle(g.x(i))).collect();
    for k in 0..=g.n_t {
        for j in 0..=g.m {
            for (i, &want) in oracle.iter().enumerate() {
                let got = field.node(k, j, i);
                assert!(
                    (got - want).abs() <= tol,
                    "k={k} j={j} x={} got {got} want {want}",
                    g.x(i)
                );
            }
        }
    }
    let i = g.nearest_x(-1.0);
    assert!((field.node(0, g.m, i) - 0.6).abs() <= tol);
    assert!((frozen_oracle(-1.0) - 0.6).abs() < 1e-12);
}

#[test]
fn frozen_instance_is_independent_of_time_and_lag() {
    let spec = frozen_instance();
    let field = solved(&spec, &frozen_grid());
    let g = field.grid;
    let terminal = field.free(g.n_t).to_vec();
    for k in 0..=g.n_t {
        for j in 0..=g.m {
            assert_eq!(field.layer(k, j), &terminal[..], "k={k} j={j}");
        }
    }
}

#[test]
fn value_bound_obstacle_and_lag_monotonicity() {
    for (spec, g) in [
        (frozen_instance(), frozen_grid()),
        (diffusive_instance(), diffusive_grid()),
        (lattice_instance(), lattice_grid()),
    ] {
        let field = solved(&spec, &g);
        let bound = spec.value_bound() + 1e-8;
        assert!(field.sup_norm() <= bound);
        let report = residuals(&field, &spec).unwrap();
        assert!(
            report.obstacle_violation_sup <= field.meta.obstacle_tol,
            "{report:?}"
        );
        let grid = field.grid;
        for k in 0..=grid.n_t {
            for j in 0..grid.m {
                let (a, b) = (field.layer(k, j), field.layer(k, j + 1));
                assert!(a.iter().zip(b).all(|(x, y)| x >= y), "k={k} j={j}");
            }
        }
    }
}

#[test]
fn residual_is_at_rounding_level_for_the_solved_field() {
    let spec = diffusive_instance();
    let field = solved(&spec, &diffusive_grid());
    let report = residuals(&field, &spec).unwrap();
    assert!(report.pde_residual_sup < 1e-9, "{report:?}");
    assert!(report.active_fraction > 0.0);
}

#[test]
fn residual_detects_a_perturbed_node() {
    let spec = diffusive_instance();
    let mut field = solved(&spec, &diffusive_grid());
    let i = field.grid.n_x / 2;
    field.free_mut(10)[i] += 1e-3;
    let report = residuals(&field, &spec).unwrap();
    assert!(report.pde_residual_sup >= 1e-3 / field.grid.dt() * 0.5);
}

#[test]
fn stencil_weights_form_a_probability_vector() {
    let spec = diffusive_instance();
    let grid = build_grid_from(&spec, &diffusive_grid()).unwrap();
    let st = Stencil::new(&spec, &grid, 0).unwrap();
    let n = grid.nx_nodes();
    let ones = vec![1.0; n];
    let zero_g = ProblemSpec {
        running: crate::model::CoefficientRef::zero(),
        ..spec.clone()
    };
    let st0 = Stencil::new(&zero_g, &grid, 0).unwrap();
    let mut out = vec![0.0; n];
    st0.apply(&ones, &mut out);
    assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-14));
    // monotone: raising one input node never lowers any output
    let mut bumped = ones.clone();
    bumped[n / 3] += 1.0;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    st.apply(&ones, &mut a);
    st.apply(&bumped, &mut b);
    assert!(a.iter().zip(&b).all(|(x, y)| y >= x));
}

#[test]
fn unstable_step_at_stencil_level_is_an_error() {
    let spec = null_instance();
    let grid = build_grid(&spec, 4, 400, -2.0, 2.0).unwrap();
    let loud = ProblemSpec {
        vol: crate::model::CoefficientRef::constant(1.0),
        ..spec
    };
    assert!(matches!(
        Stencil::new(&loud, &grid, 0),
        Err(Error::Cfl { .. })
    ));
}

#[test]
fn grid_for_another_lag_is_rejected() {
    let spec = diffusive_instance();
    let grid = build_grid_from(&spec, &diffusive_grid()).unwrap();
    let other = spec.with_delta(0.2);
    assert!(matches!(
        solve(&other, &grid, &SchemeConfig::for_spec(&other)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn solve_is_deterministic() {
    let spec = diffusive_instance();
    let a = solved(&spec, &diffusive_grid());
    let b = solved(&spec, &diffusive_grid());
    assert!(a
        .values()
        .zip(b.values())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn terminal_slice_takes_strictly_better_jumps_only() {
    let spec = frozen_instance();
    let grid = build_grid_from(&spec, &frozen_grid()).unwrap();
    let (values, jumps) = terminal_slice(&spec, &grid);
    for i in 0..=grid.n_x {
        let x = grid.x(i);
        let h = spec.h(x);
        if x > -0.2 + grid.dx() {
            assert_eq!(values[i], h);
        }
        if x < -0.2 - grid.dx() {
            assert!(jumps[i].value < h);
            assert!(jumps[i].xi.unwrap() > 0.0);
        }
    }
}

#[test]
fn intervention_is_infeasible_when_the_cone_points_outside() {
    let spec = frozen_instance();
    let grid = build_grid_from(&spec, &frozen_grid()).unwrap();
    let values = vec![0.0; grid.nx_nodes()];
    assert_eq!(
        best_impulse(&spec, &grid, 0.0, &values, grid.n_x),
        Intervention::INFEASIBLE
    );
}

#[test]
fn one_step_on_a_quadratic_adds_sigma_squared_dt() {
    let spec = ProblemSpec {
        drift: crate::model::CoefficientRef::zero(),
        running: crate::model::CoefficientRef::zero(),
        ..diffusive_instance()
    };
    let grid = build_grid_from(&spec, &diffusive_grid()).unwrap();
    let st = Stencil::new(&spec, &grid, 0).unwrap();
    let v: Vec<f64> = (0..grid.nx_nodes()).map(|i| grid.x(i).powi(2)).collect();
    let mut out = vec![0.0; v.len()];
    st.apply(&v, &mut out);
    for i in 1..grid.n_x {
        assert!((out[i] - v[i] - grid.dt() * 0.25).abs() < 1e-12, "i={i}");
    }
}
