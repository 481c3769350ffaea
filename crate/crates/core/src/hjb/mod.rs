//! Explicit monotone backward scheme for the coupled lag / free-layer system.
//!
//! On the lag region `r < delta` the value is transported along the diagonal
//! `(t, r) -> (t + dt, r + dt)` and diffused by the one-step operator; no
//! impulse is feasible there. The free layer `V0` solves the obstacle problem
//! `min{continuation, N[V]}` whose obstacle reads the `r = 0` layer of the same
//! time slice. Since that layer carries no obstacle, each slice is computed
//! lag layers first and free layer second, without any fixed-point iteration.

mod impulse;
mod stencil;

use serde::{Deserialize, Serialize};

pub use impulse::{
    best_impulse, best_impulse_slice, intervention, intervention_slice, terminal_cost,
    terminal_slice, Intervention,
};
pub use stencil::Stencil;

use crate::error::{Error, Result};
use crate::grid::{FieldMeta, Grid, ValueField};
use crate::model::ProblemSpec;

pub const SCHEME_NAME: &str = "explicit-upwind-central";

/// Fixed stencil choices plus the active-set tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub obstacle_tol: f64,
}

impl SchemeConfig {
    /// `obstacle_tol = 1e-12 * max(1, L (T + 1))`.
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        Self {
            obstacle_tol: 1e-12 * spec.value_bound().max(1.0),
        }
    }
}

fn check_grid(spec: &ProblemSpec, grid: &Grid) -> Result<()> {
    if (grid.horizon - spec.horizon).abs() > 1e-12 || (grid.delta - spec.delta).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "grid built for (T, delta) = ({}, {}) but spec has ({}, {})",
            grid.horizon, grid.delta, spec.horizon, spec.delta
        )));
    }
    Ok(())
}

/// Fresh field with the terminal slice written into every layer at `k = n_t`.
pub fn init_field(spec: &ProblemSpec, grid: &Grid, scheme: &SchemeConfig) -> Result<ValueField> {
    check_grid(spec, grid)?;
    let meta = FieldMeta {
        spec_hash: spec.hash(),
        scheme: SCHEME_NAME.to_string(),
        obstacle_tol: scheme.obstacle_tol,
    };
    let mut field = ValueField::zeros(*grid, meta);
    let (terminal, _) = terminal_slice(spec, grid);
    let n = grid.n_t;
    field.free_mut(n).copy_from_slice(&terminal);
    for j in 0..grid.m {
        field.lag_mut(n, j).copy_from_slice(&terminal);
    }
    Ok(field)
}

fn step_lag_with(field: &mut ValueField, stencil: &Stencil, k: usize) {
    let m = field.grid.m;
    let nx = field.grid.nx_nodes();
    let mut out = vec![0.0; nx];
    for j in 0..m {
        let src = field.layer(k + 1, j + 1);
        stencil.apply(src, &mut out);
        field.lag_mut(k, j).copy_from_slice(&out);
    }
}

fn step_free_with(field: &mut ValueField, spec: &ProblemSpec, stencil: &Stencil, k: usize) {
    let nx = field.grid.nx_nodes();
    let mut cont = vec![0.0; nx];
    stencil.apply(field.free(k + 1), &mut cont);
    let jumps = intervention_slice(field, spec, k);
    let dst = field.free_mut(k);
    for i in 0..nx {
        dst[i] = if jumps[i].value < cont[i] {
            jumps[i].value
        } else {
            cont[i]
        };
    }
}

/// Writes the lag layers `r_0 .. r_{m-1}` at `t_k` from the slice `t_{k+1}`.
pub fn step_lag_layers(field: &mut ValueField, spec: &ProblemSpec, k: usize) -> Result<()> {
    let grid = field.grid;
    if k >= grid.n_t {
        return Err(Error::Precondition(format!(
            "time index {k} has no successor slice"
        )));
    }
    let stencil = Stencil::new(spec, &grid, k)?;
    step_lag_with(field, &stencil, k);
    Ok(())
}

/// Writes `V0(t_k, .)`; the `r = 0` layer at `t_k` must already be populated.
pub fn step_free_layer(field: &mut ValueField, spec: &ProblemSpec, k: usize) -> Result<()> {
    let grid = field.grid;
    if k >= grid.n_t {
        return Err(Error::Precondition(format!(
            "time index {k} has no successor slice"
        )));
    }
    let stencil = Stencil::new(spec, &grid, k)?;
    step_free_with(field, spec, &stencil, k);
    Ok(())
}

/// Backward sweep `k = n_t - 1 .. 0`.
pub fn solve(spec: &ProblemSpec, grid: &Grid, scheme: &SchemeConfig) -> Result<ValueField> {
    let mut field = init_field(spec, grid, scheme)?;
    for k in (0..grid.n_t).rev() {
        let stencil = Stencil::new(spec, grid, k)?;
        step_lag_with(&mut field, &stencil, k);
        step_free_with(&mut field, spec, &stencil, k);
    }
    Ok(field)
}

/// Sup norms of the discrete min-form residual and of the obstacle violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `sup |min{PDE part, N^[V] - V}|` over interior nodes.
    pub pde_residual_sup: f64,
    /// `sup (V - N^[V])^+`.
    pub obstacle_violation_sup: f64,
    /// Share of interior free-layer nodes where the obstacle binds.
    pub active_fraction: f64,
}

/// Residuals of the unified obstacle form: on lag layers the obstacle is the
/// constant `2 L (T + 1)`, on the free layer it is `N[V](t, 0, x)`.
pub fn residuals(field: &ValueField, spec: &ProblemSpec) -> Result<ResidualReport> {
    let grid = field.grid;
    check_grid(spec, &grid)?;
    let dt = grid.dt();
    let vacuous = 2.0 * spec.value_bound();
    let tol = field.meta.obstacle_tol;
    let mut pde_sup: f64 = 0.0;
    let mut violation: f64 = 0.0;
    let mut active = 0usize;
    let mut free_nodes = 0usize;

    for k in 0..grid.n_t {
        let stencil = Stencil::new(spec, &grid, k)?;
        for j in 0..grid.m {
            let src = field.layer(k + 1, j + 1);
            let cur = field.lag(k, j);
            for (i, &v) in cur.iter().enumerate().take(grid.n_x).skip(1) {
                let pde = (stencil.apply_at(src, i) - v) / dt;
                let res = pde.min(vacuous - v);
                pde_sup = pde_sup.max(res.abs());
                violation = violation.max(v - vacuous);
            }
        }
        let jumps = intervention_slice(field, spec, k);
        let src = field.free(k + 1);
        let cur = field.free(k);
        for i in 1..grid.n_x {
            let pde = (stencil.apply_at(src, i) - cur[i]) / dt;
            let gap = jumps[i].value - cur[i];
            let res = pde.min(gap);
            pde_sup = pde_sup.max(res.abs());
            violation = violation.max(-gap);
            free_nodes += 1;
            if gap <= tol {
                active += 1;
            }
        }
    }
    Ok(ResidualReport {
        pde_residual_sup: pde_sup,
        obstacle_violation_sup: violation.max(0.0),
        active_fraction: if free_nodes == 0 {
            0.0
        } else {
            active as f64 / free_nodes as f64
        },
    })
}

#[cfg(test)]
mod tests;
