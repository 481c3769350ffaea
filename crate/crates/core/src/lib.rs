//! Finite-horizon stochastic impulse control with a decision lag.
//!
//! The value function `V(t, r, x)` depends on time, on the elapsed time `r`
//! since the last impulse and on the state. Impulses are only feasible once
//! `r >= delta`, except at the horizon where a terminal impulse is always
//! allowed. This crate
//!
//! * describes problem instances ([`model`]) and checks the standing bounded /
//!   Lipschitz / coercivity hypotheses on samples,
//! * discretizes `(t, r, x)` with the `r` axis collapsed at `r = delta`
//!   ([`grid`]),
//! * solves the coupled quasi-variational system with an explicit monotone
//!   scheme ([`hjb`]),
//! * extracts the optimal impulse policy ([`policy`]),
//! * simulates the controlled diffusion and checks the dynamic programming
//!   principle by Monte Carlo ([`simulate`]),
//! * and provides the classical no-lag baseline, sup/inf-convolutions and
//!   continuity moduli ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod grid;
pub mod hjb;
pub mod instances;
pub mod model;
pub mod numeric;
pub mod policy;
pub mod simulate;

pub use error::{Error, Result};
pub use grid::{build_grid, interpolate, Grid, ValueField};
pub use hjb::{residuals, solve, ResidualReport, SchemeConfig};
pub use model::{
    hamiltonian, validate_hypotheses, CoefficientRef, ConeSpec, Family, ImpulseCostSpec,
    ProblemSpec, ValidationReport,
};
pub use policy::{decide, extract_policy, Action, ImpulseSchedule, PolicyTable};
pub use simulate::{
    check_admissible, dpp_check, estimate_cost, simulate_path, Controller, McConfig, SimResult,
};
