//! Explicit monotone one-step operator
//! `v -> v + dt (b D_upwind v + 1/2 sigma^2 D2 v + g)` on one time slice.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ProblemSpec;

// Rounding slack on the center weight; lattice-exact grids sit at zero.
const WEIGHT_SLACK: f64 = 1e-12;

/// Tridiagonal weights plus source term for time slice `t_k`.
#[derive(Debug, Clone)]
pub struct Stencil {
    lower: Vec<f64>,
    center: Vec<f64>,
    upper: Vec<f64>,
    source: Vec<f64>,
}

impl Stencil {
    /// Coefficients are frozen at `t_k`. At the two boundary nodes the
    /// copied-slope extrapolation makes the second difference vanish; drift
    /// pointing into the domain is upwinded as usual and drift pointing out
    /// of it is dropped so every weight stays nonnegative.
    pub fn new(spec: &ProblemSpec, grid: &Grid, k: usize) -> Result<Self> {
        let n = grid.nx_nodes();
        let (dt, dx) = (grid.dt(), grid.dx());
        let t = grid.t(k);
        let mut s = Stencil {
            lower: vec![0.0; n],
            center: vec![1.0; n],
            upper: vec![0.0; n],
            source: vec![0.0; n],
        };
        for i in 0..n {
            let x = grid.x(i);
            let b = spec.b(t, x);
            let sigma = spec.sigma(t, x);
            let boundary_lo = i == 0;
            let boundary_hi = i == n - 1;
            let (mut lo, mut up) = (0.0, 0.0);
            if !boundary_lo && !boundary_hi {
                let diff = 0.5 * sigma * sigma * dt / (dx * dx);
                lo += diff;
                up += diff;
            }
            if b > 0.0 && !boundary_hi {
                up += b * dt / dx;
            } else if b < 0.0 && !boundary_lo {
                lo += -b * dt / dx;
            }
            let center = 1.0 - lo - up;
            if center < -WEIGHT_SLACK {
                let rate = (lo + up) / dt;
                return Err(Error::Cfl {
                    dt,
                    max_dt: 1.0 / rate,
                });
            }
            s.lower[i] = lo;
            s.upper[i] = up;
            s.center[i] = center.max(0.0);
            s.source[i] = dt * spec.g(t, x);
        }
        Ok(s)
    }

    /// `out = S[src]`.
    pub fn apply(&self, src: &[f64], out: &mut [f64]) {
        let n = src.len();
        for i in 0..n {
            let mut v = self.center[i] * src[i] + self.source[i];
            if i > 0 {
                v += self.lower[i] * src[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * src[i + 1];
            }
            out[i] = v;
        }
    }

    /// `S[src]_i` for a single node.
    pub fn apply_at(&self, src: &[f64], i: usize) -> f64 {
        let mut v = self.center[i] * src[i] + self.source[i];
        if i > 0 {
            v += self.lower[i] * src[i - 1];
        }
        if i + 1 < src.len() {
            v += self.upper[i] * src[i + 1];
        }
        v
    }
}
