//! Reference problem instances used by the test suites and shipped configs.
//!
//! * [`null_instance`]: all coefficients zero; impulses only add cost, so
//!   `V == 0`.
//! * [`frozen_instance`]: no dynamics, `h(x) = |x|`, upward cone; the value is
//!   the terminal minimization at every `(t, r)`.
//! * [`diffusive_instance`]: constant drift 0.2, volatility 0.5, tent-shaped
//!   running and terminal costs, two-sided impulses.

use crate::grid::GridSpec;
use crate::model::{CoefficientRef, ConeDirection, ConeSpec, ImpulseCostSpec, ProblemSpec};

pub fn null_instance() -> ProblemSpec {
    ProblemSpec {
        horizon: 1.0,
        delta: 0.25,
        lipschitz: 1.0,
        ell0: 0.1,
        alpha: 0.5,
        drift: CoefficientRef::zero(),
        vol: CoefficientRef::zero(),
        running: CoefficientRef::zero(),
        terminal: CoefficientRef::zero(),
        impulse_cost: ImpulseCostSpec::constant(0.1, 0.5),
        cone: ConeSpec::new(ConeDirection::FullLine),
        dim: 1,
    }
}

pub fn null_grid() -> GridSpec {
    GridSpec {
        n_t: 400,
        n_x: 201,
        x_lo: -2.0,
        x_hi: 2.0,
    }
}

pub fn frozen_instance() -> ProblemSpec {
    ProblemSpec {
        horizon: 1.0,
        delta: 0.25,
        lipschitz: 2.0,
        ell0: 0.1,
        alpha: 0.5,
        drift: CoefficientRef::zero(),
        vol: CoefficientRef::zero(),
        running: CoefficientRef::zero(),
        terminal: CoefficientRef::table(&[-2.0, 0.0, 2.0], &[2.0, 0.0, 2.0]),
        impulse_cost: ImpulseCostSpec::constant(0.1, 0.5),
        cone: ConeSpec::new(ConeDirection::Nonnegative),
        dim: 1,
    }
}

pub fn frozen_grid() -> GridSpec {
    GridSpec {
        n_t: 100,
        n_x: 200,
        x_lo: -2.0,
        x_hi: 2.0,
    }
}

pub fn diffusive_instance() -> ProblemSpec {
    ProblemSpec {
        horizon: 1.0,
        delta: 0.1,
        lipschitz: 1.0,
        ell0: 0.1,
        alpha: 0.1,
        drift: CoefficientRef::affine(0.2, 0.0),
        vol: CoefficientRef::constant(0.5),
        running: CoefficientRef::table(&[-1.0, 0.0, 1.0], &[0.25, 0.0, 0.25]),
        terminal: CoefficientRef::table(&[-1.0, 0.0, 1.0], &[0.75, 0.0, 0.75]),
        impulse_cost: ImpulseCostSpec::constant(0.1, 0.1),
        cone: ConeSpec::new(ConeDirection::FullLine),
        dim: 1,
    }
}

pub fn diffusive_grid() -> GridSpec {
    GridSpec {
        n_t: 200,
        n_x: 250,
        x_lo: -5.0,
        x_hi: 5.0,
    }
}

/// Driftless variant of the diffusive instance on a short horizon; with
/// [`lattice_grid`] the explicit scheme moves by exactly one node up or down
/// per step (`sigma^2 dt = dx^2`).
pub fn lattice_instance() -> ProblemSpec {
    ProblemSpec {
        horizon: 0.2,
        delta: 0.05,
        drift: CoefficientRef::zero(),
        ..diffusive_instance()
    }
}

pub fn lattice_grid() -> GridSpec {
    GridSpec {
        n_t: 20,
        n_x: 80,
        x_lo: -2.0,
        x_hi: 2.0,
    }
}
