//! Discretization of `(t, r, x)` and storage of solved value fields.
//!
//! The elapsed-time axis only carries the lag region `r_j = j dt`,
//! `j = 0..m`, with `m dt = delta`; every `r >= delta` resolves to the free
//! layer `V0(t, x) = V(t, delta, x)`.

mod io;

use serde::{Deserialize, Serialize};

pub use io::{load_field, save_field, FieldManifest};

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::numeric::{lerp, locate};

/// Grid resolution as it appears in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_x: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub horizon: f64,
    pub delta: f64,
    /// Number of time steps; `dt = T / n_t`.
    pub n_t: usize,
    /// Lag steps, `delta = m dt`.
    pub m: usize,
    /// Number of state intervals; `dx = (x_hi - x_lo) / n_x`.
    pub n_x: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Grid {
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_x as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_t {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_x {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.dx()
        }
    }

    /// Elapsed time of layer `j`; layer `m` is the collapsed free layer.
    pub fn r(&self, j: usize) -> f64 {
        if j >= self.m {
            self.delta
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nx_nodes(&self) -> usize {
        self.n_x + 1
    }

    pub fn nearest_t(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.n_t)
    }

    pub fn nearest_x(&self, x: f64) -> usize {
        (((x - self.x_lo) / self.dx()).round().max(0.0) as usize).min(self.n_x)
    }

    /// Grid offset `d dx` in exact integer-times-step form.
    pub fn offset(&self, d: isize) -> f64 {
        d as f64 * self.dx()
    }

    /// Largest `dt` satisfying `dt (max sigma^2 / dx^2 + max |b| / dx) <= 1 - margin`,
    /// with the coefficient maxima taken over the grid nodes.
    pub fn max_stable_dt(&self, spec: &ProblemSpec, margin: f64) -> f64 {
        let dx = self.dx();
        let mut rate: f64 = 0.0;
        for k in 0..=self.n_t {
            let t = self.t(k);
            for i in 0..=self.n_x {
                let x = self.x(i);
                let s = spec.sigma(t, x);
                rate = rate.max(s * s / (dx * dx) + spec.b(t, x).abs() / dx);
            }
        }
        if rate == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - margin) / rate
        }
    }

    /// True when `[x_lo, x_hi]` contains every state of interest with a
    /// buffer of `4 L sqrt(T)` on both sides.
    pub fn has_buffer(&self, spec: &ProblemSpec, states: &[f64]) -> bool {
        let buffer = 4.0 * spec.lipschitz * spec.horizon.sqrt();
        states
            .iter()
            .all(|&x| x - buffer >= self.x_lo && x + buffer <= self.x_hi)
    }
}

fn commensurate(delta: f64, horizon: f64, n_t: usize) -> Option<usize> {
    let ratio = delta * n_t as f64 / horizon;
    let m = ratio.round();
    ((ratio - m).abs() <= 1e-9 * ratio.max(1.0) && m >= 1.0).then_some(m as usize)
}

/// Builds a grid with the default CFL margin of zero.
pub fn build_grid(
    spec: &ProblemSpec,
    n_t: usize,
    n_x: usize,
    x_lo: f64,
    x_hi: f64,
) -> Result<Grid> {
    build_grid_with_margin(spec, n_t, n_x, x_lo, x_hi, 0.0)
}

pub fn build_grid_from(spec: &ProblemSpec, g: &GridSpec) -> Result<Grid> {
    build_grid(spec, g.n_t, g.n_x, g.x_lo, g.x_hi)
}

pub fn build_grid_with_margin(
    spec: &ProblemSpec,
    n_t: usize,
    n_x: usize,
    x_lo: f64,
    x_hi: f64,
    margin: f64,
) -> Result<Grid> {
    spec.check_structure()?;
    if n_t == 0 {
        return Err(Error::config("n_t", "must be positive"));
    }
    if n_x < 2 {
        return Err(Error::config("n_x", "need at least two state intervals"));
    }
    if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
        return Err(Error::config(
            "x_lo/x_hi",
            format!("need x_lo < x_hi, got [{x_lo}, {x_hi}]"),
        ));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::config("cfl_margin", "must lie in [0, 1)"));
    }
    let m = match commensurate(spec.delta, spec.horizon, n_t) {
        Some(m) => m,
        None => {
            let below = (1..n_t)
                .rev()
                .find(|&n| commensurate(spec.delta, spec.horizon, n).is_some())
                .unwrap_or(0);
            let above = (n_t + 1..=n_t.saturating_mul(1000).max(n_t + 1))
                .find(|&n| commensurate(spec.delta, spec.horizon, n).is_some())
                .unwrap_or(0);
            return Err(Error::LagNotCommensurate {
                ratio: spec.delta * n_t as f64 / spec.horizon,
                below,
                above,
            });
        }
    };
    let grid = Grid {
        horizon: spec.horizon,
        delta: spec.delta,
        n_t,
        m,
        n_x,
        x_lo,
        x_hi,
    };
    let max_dt = grid.max_stable_dt(spec, margin);
    let dt = grid.dt();
    // relative slack lets lattice-exact configurations (ratio == 1) through
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt });
    }
    Ok(grid)
}

/// Provenance of a solved field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub spec_hash: String,
    pub scheme: String,
    pub obstacle_tol: f64,
}

/// Solved value function on the grid.
///
/// `v0` is indexed `[k][i]`, `v_lag` `[k][j][i]` for `j < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: Grid,
    pub v0: Vec<f64>,
    pub v_lag: Vec<f64>,
    pub meta: FieldMeta,
}

impl ValueField {
    pub fn zeros(grid: Grid, meta: FieldMeta) -> Self {
        let nx = grid.nx_nodes();
        Self {
            grid,
            v0: vec![0.0; (grid.n_t + 1) * nx],
            v_lag: vec![0.0; (grid.n_t + 1) * grid.m * nx],
            meta,
        }
    }

    /// Free layer `V0(t_k, .)`.
    pub fn free(&self, k: usize) -> &[f64] {
        let nx = self.grid.nx_nodes();
        &self.v0[k * nx..(k + 1) * nx]
    }

    pub fn free_mut(&mut self, k: usize) -> &mut [f64] {
        let nx = self.grid.nx_nodes();
        &mut self.v0[k * nx..(k + 1) * nx]
    }

    /// Lag layer `V(t_k, r_j, .)` for `j < m`.
    pub fn lag(&self, k: usize, j: usize) -> &[f64] {
        let nx = self.grid.nx_nodes();
        let start = (k * self.grid.m + j) * nx;
        &self.v_lag[start..start + nx]
    }

    pub fn lag_mut(&mut self, k: usize, j: usize) -> &mut [f64] {
        let nx = self.grid.nx_nodes();
        let start = (k * self.grid.m + j) * nx;
        &mut self.v_lag[start..start + nx]
    }

    /// Layer `j` at time `k`, with `j >= m` resolving to the free layer.
    pub fn layer(&self, k: usize, j: usize) -> &[f64] {
        if j >= self.grid.m {
            self.free(k)
        } else {
            self.lag(k, j)
        }
    }

    pub fn node(&self, k: usize, j: usize, i: usize) -> f64 {
        self.layer(k, j)[i]
    }

    /// Iterates every stored node value.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.v0.iter().chain(self.v_lag.iter()).copied()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Multilinear interpolation in `(t, min(r, delta), x)` with clamping to the
/// grid; exact at nodes.
pub fn interpolate(field: &ValueField, t: f64, r: f64, x: f64) -> f64 {
    let g = &field.grid;
    let (k, wt) = locate(t / g.dt(), g.n_t);
    let (j, wr) = locate(r.min(g.delta) / g.dt(), g.m);
    let (i, wx) = locate((x - g.x_lo) / g.dx(), g.n_x);

    let along_x = |kk: usize, jj: usize| {
        let row = field.layer(kk, jj);
        if wx == 0.0 {
            row[i]
        } else {
            lerp(row[i], row[i + 1], wx)
        }
    };
    let along_r = |kk: usize| {
        let a = along_x(kk, j);
        if wr == 0.0 {
            a
        } else {
            lerp(a, along_x(kk, j + 1), wr)
        }
    };
    let a = along_r(k);
    if wt == 0.0 {
        a
    } else {
        lerp(a, along_r(k + 1), wt)
    }
}
