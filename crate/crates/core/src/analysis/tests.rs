use super::*;
use crate::grid::{build_grid_from, FieldMeta, GridSpec};
use crate::instances::{
    diffusive_grid, diffusive_instance, frozen_grid, frozen_instance, null_grid, null_instance,
};

fn solved(spec: &ProblemSpec, gs: &GridSpec) -> ValueField {
    let grid = build_grid_from(spec, gs).unwrap();
    solve(spec, &grid, &SchemeConfig::for_spec(spec)).unwrap()
}

fn small_null_grid() -> GridSpec {
    GridSpec {
        n_t: 40,
        n_x: 40,
        x_lo: -2.0,
        x_hi: 2.0,
    }
}

/// Frozen instance on a coarse time axis and a fine state axis, so that the
/// convolution gaps resolve below one state step.
fn fine_frozen_grid() -> GridSpec {
    GridSpec {
        n_t: 4,
        n_x: 1000,
        x_lo: -2.0,
        x_hi: 2.0,
    }
}

#[test]
fn classical_solution_on_reference_instances() {
    let a = null_instance();
    let grid = build_grid_from(&a, &small_null_grid()).unwrap();
    let sol = classical_qvi_solve(&a, &grid).unwrap();
    assert!(sol.values.iter().all(|&v| v == 0.0));

    let b = frozen_instance();
    let grid = build_grid_from(&b, &frozen_grid()).unwrap();
    let sol = classical_qvi_solve(&b, &grid).unwrap();
    let field = solved(&b, &frozen_grid());
    for k in 0..=grid.n_t {
        assert_eq!(sol.slice(k), field.free(k), "k={k}");
    }

    let c = diffusive_instance();
    let grid = build_grid_from(&c, &diffusive_grid()).unwrap();
    let sol = classical_qvi_solve(&c, &grid).unwrap();
    let field = solved(&c, &diffusive_grid());
    let eps = 10.0 * (grid.dt() + grid.dx());
    assert!(sol
        .slice(0)
        .iter()
        .zip(field.free(0))
        .all(|(cl, v)| *cl <= v + eps));
    assert!(sol.max_iterations >= 1 && sol.max_iterations <= CLASSICAL_MAX_ITER);
}

#[test]
fn limit_study_on_null_and_frozen_instances_has_zero_gaps() {
    let a = null_instance();
    let grid = build_grid_from(&a, &null_grid()).unwrap();
    let study = lag_limit_study(&a, &grid, &[0.2, 0.1, 0.05]).unwrap();
    assert!(study.gaps.iter().all(|&g| g == 0.0));
    assert_eq!(study.rate, None);

    let b = frozen_instance();
    let gs = GridSpec {
        n_t: 20,
        ..frozen_grid()
    };
    let grid = build_grid_from(&b, &gs).unwrap();
    let study = lag_limit_study(&b, &grid, &[0.2, 0.1, 0.05]).unwrap();
    assert!(study.gaps.iter().all(|&g| g <= 1e-12), "{:?}", study.gaps);
}

#[test]
fn limit_study_gaps_shrink_with_the_lag() {
    let c = diffusive_instance();
    let grid = build_grid_from(&c, &diffusive_grid()).unwrap();
    let study = lag_limit_study(&c, &grid, &[0.2, 0.1, 0.05]).unwrap();
    assert!(
        study.gaps.windows(2).all(|w| w[1] < w[0]),
        "{:?}",
        study.gaps
    );
    let eps = 10.0 * (grid.dt() + grid.dx());
    assert!(
        study.ordering_violation <= eps,
        "{}",
        study.ordering_violation
    );
    let csv = study.to_csv();
    assert!(csv.starts_with("delta,sup_gap\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn limit_study_rejects_bad_lags() {
    let c = diffusive_instance();
    let grid = build_grid_from(&c, &diffusive_grid()).unwrap();
    match lag_limit_study(&c, &grid, &[0.2, 0.0123]) {
        Err(Error::Config { field, reason }) => {
            assert_eq!(field, "deltas");
            assert!(reason.contains("0.005"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
    assert!(lag_limit_study(&c, &grid, &[0.1, 0.2]).is_err());
    assert!(lag_limit_study(&c, &grid, &[]).is_err());
}

#[test]
fn convolutions_of_a_constant_field_are_the_constant() {
    let grid = build_grid_from(&null_instance(), &small_null_grid()).unwrap();
    let meta = FieldMeta {
        spec_hash: String::new(),
        scheme: String::new(),
        obstacle_tol: 0.0,
    };
    let mut field = ValueField::zeros(grid, meta);
    field.v0.iter_mut().for_each(|v| *v = 0.7);
    field.v_lag.iter_mut().for_each(|v| *v = 0.7);
    for gamma in [0.5, 0.05] {
        assert_eq!(sup_convolution(&field, gamma).unwrap(), field);
        assert_eq!(inf_convolution(&field, gamma).unwrap(), field);
    }
}

#[test]
fn gamma_outside_the_unit_interval_is_rejected() {
    let field = solved(&null_instance(), &small_null_grid());
    for gamma in [0.0, 1.0, -0.3, f64::NAN] {
        assert!(matches!(
            sup_convolution(&field, gamma),
            Err(Error::Config { .. })
        ));
    }
}

#[test]
fn convolutions_sandwich_the_field_and_tighten_with_gamma() {
    let field = solved(&frozen_instance(), &fine_frozen_grid());
    let mut upper_gaps = Vec::new();
    let mut lower_gaps = Vec::new();
    for gamma in [0.2, 0.1, 0.05] {
        let up = sup_convolution(&field, gamma).unwrap();
        let down = inf_convolution(&field, gamma).unwrap();
        for ((l, v), u) in down.values().zip(field.values()).zip(up.values()) {
            assert!(l <= v && v <= u);
        }
        assert!(min_scaled_second_difference(&up, gamma) >= -1.01);
        upper_gaps.push(sup_distance(&up, &field));
        lower_gaps.push(sup_distance(&down, &field));
    }
    assert!(upper_gaps.windows(2).all(|w| w[1] < w[0]), "{upper_gaps:?}");
    assert!(lower_gaps.windows(2).all(|w| w[1] < w[0]), "{lower_gaps:?}");
}

#[test]
fn moduli_of_reference_fields() {
    let a = continuity_moduli(&solved(&null_instance(), &small_null_grid()));
    assert_eq!(
        (
            a.x_lipschitz,
            a.t_holder_local,
            a.t_holder_global,
            a.r_holder
        ),
        (0.0, 0.0, 0.0, 0.0)
    );

    let b = continuity_moduli(&solved(&frozen_instance(), &frozen_grid()));
    assert!((b.x_lipschitz - 1.0).abs() < 1e-9, "{b:?}");
    assert_eq!(
        (b.t_holder_local, b.t_holder_global, b.r_holder),
        (0.0, 0.0, 0.0)
    );
}

#[test]
fn diffusive_x_modulus_is_stable_under_refinement() {
    let c = diffusive_instance();
    let coarse = GridSpec {
        n_t: 40,
        n_x: 100,
        x_lo: -5.0,
        x_hi: 5.0,
    };
    let fine = GridSpec {
        n_t: 160,
        n_x: 200,
        x_lo: -5.0,
        x_hi: 5.0,
    };
    let m1 = continuity_moduli(&solved(&c, &coarse));
    let m2 = continuity_moduli(&solved(&c, &fine));
    let ratio = m2.x_lipschitz / m1.x_lipschitz;
    assert!((1.0 / 1.5..=1.5).contains(&ratio), "{m1:?} {m2:?}");
}
