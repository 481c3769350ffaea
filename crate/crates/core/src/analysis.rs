//! Classical no-lag baseline, the vanishing-lag study, sup/inf-convolutions
//! and empirical continuity moduli.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, ValueField};
use crate::hjb::{best_impulse_slice, solve, terminal_slice, SchemeConfig, Stencil};
use crate::model::ProblemSpec;
use crate::numeric::fmt17;

pub const CLASSICAL_TOL: f64 = 1e-10;
pub const CLASSICAL_MAX_ITER: usize = 50;

/// Value of the classical impulse problem (no lag) over `(t_k, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSolution {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Largest number of in-slice fixed-point iterations used.
    pub max_iterations: usize,
}

impl ClassicalSolution {
    pub fn slice(&self, k: usize) -> &[f64] {
        let nx = self.grid.nx_nodes();
        &self.values[k * nx..(k + 1) * nx]
    }
}

/// Backward sweep of `v = min{S[v(t_{k+1})], N[v](t_k)}` where the obstacle
/// reads the slice being computed; each slice is solved by value iteration.
pub fn classical_qvi_solve(spec: &ProblemSpec, grid: &Grid) -> Result<ClassicalSolution> {
    let nx = grid.nx_nodes();
    let mut values = vec![0.0; (grid.n_t + 1) * nx];
    let (terminal, _) = terminal_slice(spec, grid);
    values[grid.n_t * nx..].copy_from_slice(&terminal);
    let mut max_iterations = 0;
    let mut cont = vec![0.0; nx];
    for k in (0..grid.n_t).rev() {
        let stencil = Stencil::new(spec, grid, k)?;
        let (head, tail) = values.split_at_mut((k + 1) * nx);
        stencil.apply(&tail[..nx], &mut cont);
        let mut w = cont.clone();
        let mut trace = Vec::new();
        let mut converged = false;
        for it in 1..=CLASSICAL_MAX_ITER {
            let jumps = best_impulse_slice(spec, grid, grid.t(k), &w);
            let next: Vec<f64> = cont
                .iter()
                .zip(&jumps)
                .map(|(&c, j)| if j.value < c { j.value } else { c })
                .collect();
            let change = next
                .iter()
                .zip(&w)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            trace.push(change);
            w = next;
            if change <= CLASSICAL_TOL {
                max_iterations = max_iterations.max(it);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: CLASSICAL_MAX_ITER,
                trace,
            });
        }
        head[k * nx..].copy_from_slice(&w);
    }
    Ok(ClassicalSolution {
        grid: *grid,
        values,
        max_iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStudy {
    pub deltas: Vec<f64>,
    /// `sup_{r, x} |V_delta(0, r, x) - V_classical(0, x)|` per lag.
    pub gaps: Vec<f64>,
    /// Fitted log-log slope of gap against delta (absent with < 2 positive gaps).
    pub rate: Option<f64>,
    /// Largest breach of `V_classical <= V_{delta_small} <= V_{delta_large}`
    /// over all nodes and consecutive lags.
    pub ordering_violation: f64,
}

impl LimitStudy {
    /// CSV with columns `delta,sup_gap`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,sup_gap\n");
        for (d, g) in self.deltas.iter().zip(&self.gaps) {
            let _ = writeln!(s, "{},{}", fmt17(*d), fmt17(*g));
        }
        s
    }
}

/// `sup (small - large)^+` over the shared nodes of two fields on the same
/// `(t, x)` grid, comparing each `r` node with the lag collapse applied.
pub fn lag_ordering_violation(small: &ValueField, large: &ValueField) -> f64 {
    let gs = &small.grid;
    let gl = &large.grid;
    assert_eq!(
        (gs.n_t, gs.n_x),
        (gl.n_t, gl.n_x),
        "fields must share the (t, x) grid"
    );
    let m_max = gs.m.max(gl.m);
    let mut worst: f64 = 0.0;
    for k in 0..=gs.n_t {
        for j in 0..=m_max {
            let a = small.layer(k, j);
            let b = large.layer(k, j);
            for i in 0..=gs.n_x {
                worst = worst.max(a[i] - b[i]);
            }
        }
    }
    worst
}

fn fitted_slope(deltas: &[f64], gaps: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(gaps)
        .filter(|(_, &g)| g > 0.0)
        .map(|(&d, &g)| (d.ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves the lag problem for each `delta` (strictly decreasing) on a common
/// `(t, x)` grid and measures the distance to the classical value at `t = 0`.
pub fn lag_limit_study(spec: &ProblemSpec, base_grid: &Grid, deltas: &[f64]) -> Result<LimitStudy> {
    if deltas.is_empty() {
        return Err(Error::config("deltas", "at least one lag is required"));
    }
    if !deltas.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::config("deltas", "lags must be strictly decreasing"));
    }
    let dt = base_grid.dt();
    for &d in deltas {
        let steps = d / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            let admissible: Vec<String> = (1..=6).map(|j| format!("{}", j as f64 * dt)).collect();
            return Err(Error::config(
                "deltas",
                format!(
                    "lag {d} is not a multiple of dt = {dt}; admissible lags are multiples of dt, e.g. {}",
                    admissible.join(", ")
                ),
            ));
        }
    }
    let classical = classical_qvi_solve(spec, base_grid)?;
    let cl0 = classical.slice(0);
    let mut gaps = Vec::with_capacity(deltas.len());
    let mut violation: f64 = 0.0;
    let mut previous: Option<ValueField> = None;
    for &d in deltas {
        let lag_spec = spec.with_delta(d);
        let grid = build_grid(
            &lag_spec,
            base_grid.n_t,
            base_grid.n_x,
            base_grid.x_lo,
            base_grid.x_hi,
        )?;
        let field = solve(&lag_spec, &grid, &SchemeConfig::for_spec(&lag_spec))?;
        let mut gap: f64 = 0.0;
        for j in 0..=grid.m {
            for (v, c) in field.layer(0, j).iter().zip(cl0) {
                gap = gap.max((v - c).abs());
            }
        }
        for k in 0..=grid.n_t {
            for j in 0..=grid.m {
                for (v, c) in field.layer(k, j).iter().zip(classical.slice(k)) {
                    violation = violation.max(c - v);
                }
            }
        }
        if let Some(prev) = &previous {
            violation = violation.max(lag_ordering_violation(&field, prev));
        }
        gaps.push(gap);
        previous = Some(field);
    }
    Ok(LimitStudy {
        deltas: deltas.to_vec(),
        rate: fitted_slope(deltas, &gaps),
        gaps,
        ordering_violation: violation,
    })
}

/// Node coordinates `(t_k, r_j, x_i)` for `j = 0..=m`, layer `m` being the
/// free layer at `r = delta`.
fn node_count(g: &Grid) -> (usize, usize, usize) {
    (g.n_t + 1, g.m + 1, g.n_x + 1)
}

fn to_flat(field: &ValueField) -> Vec<f64> {
    let g = &field.grid;
    let (nt, nr, nx) = node_count(g);
    let mut out = Vec::with_capacity(nt * nr * nx);
    for k in 0..nt {
        for j in 0..nr {
            out.extend_from_slice(field.layer(k, j));
        }
    }
    out
}

fn from_flat(template: &ValueField, flat: &[f64]) -> ValueField {
    let g = template.grid;
    let (nt, nr, nx) = node_count(&g);
    let mut field = template.clone();
    for k in 0..nt {
        for j in 0..nr {
            let src = &flat[(k * nr + j) * nx..(k * nr + j + 1) * nx];
            if j == g.m {
                field.free_mut(k).copy_from_slice(src);
            } else {
                field.lag_mut(k, j).copy_from_slice(src);
            }
        }
    }
    field
}

fn convolve(field: &ValueField, gamma: f64, sup: bool) -> Result<ValueField> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config(
            "gamma",
            format!("must lie in (0, 1), got {gamma}"),
        ));
    }
    let g = field.grid;
    let (nt, nr, nx) = node_count(&g);
    let (dt, dx) = (g.dt(), g.dx());
    let flat = to_flat(field);
    let (lo, hi) = flat
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    // A node farther than gamma * sqrt(2 osc) pays a penalty above the
    // oscillation and can never beat the center node.
    let radius = gamma * (2.0 * (hi - lo)).sqrt();
    let kt = (radius / dt).ceil() as usize;
    let kx = (radius / dx).ceil() as usize;
    let inv = 1.0 / (2.0 * gamma * gamma);
    let r_of = |j: usize| g.r(j);

    let out: Vec<f64> = (0..nt * nr * nx)
        .into_par_iter()
        .map(|n| {
            let (k, rest) = (n / (nr * nx), n % (nr * nx));
            let (j, i) = (rest / nx, rest % nx);
            let mut best = flat[n];
            for k2 in k.saturating_sub(kt)..=(k + kt).min(nt - 1) {
                let dt2 = (g.t(k2) - g.t(k)).powi(2);
                for j2 in j.saturating_sub(kt)..=(j + kt).min(nr - 1) {
                    let dr2 = (r_of(j2) - r_of(j)).powi(2);
                    let base = (k2 * nr + j2) * nx;
                    for i2 in i.saturating_sub(kx)..=(i + kx).min(nx - 1) {
                        let pen = (dt2 + dr2 + (g.x(i2) - g.x(i)).powi(2)) * inv;
                        let v = flat[base + i2];
                        if sup {
                            best = best.max(v - pen);
                        } else {
                            best = best.min(v + pen);
                        }
                    }
                }
            }
            best
        })
        .collect();
    Ok(from_flat(field, &out))
}

/// Semiconvex approximation `sup_{nodes} v(n') - |n - n'|^2 / (2 gamma^2)`.
pub fn sup_convolution(field: &ValueField, gamma: f64) -> Result<ValueField> {
    convolve(field, gamma, true)
}

/// Semiconcave approximation `inf_{nodes} v(n') + |n - n'|^2 / (2 gamma^2)`.
pub fn inf_convolution(field: &ValueField, gamma: f64) -> Result<ValueField> {
    convolve(field, gamma, false)
}

/// Smallest second difference along the `t`, `r` and `x` axes, divided by
/// `step^2 / gamma^2`. A sup-convolution keeps this `>= -1`.
pub fn min_scaled_second_difference(field: &ValueField, gamma: f64) -> f64 {
    let g = field.grid;
    let (nt, nr, nx) = node_count(&g);
    let flat = to_flat(field);
    let at = |k: usize, j: usize, i: usize| flat[(k * nr + j) * nx + i];
    let scale_t = g.dt() * g.dt() / (gamma * gamma);
    let scale_x = g.dx() * g.dx() / (gamma * gamma);
    let mut worst = f64::INFINITY;
    for k in 0..nt {
        for j in 0..nr {
            for i in 0..nx {
                let c = at(k, j, i);
                if k > 0 && k + 1 < nt {
                    worst = worst.min((at(k - 1, j, i) - 2.0 * c + at(k + 1, j, i)) / scale_t);
                }
                if j > 0 && j + 1 < nr {
                    worst = worst.min((at(k, j - 1, i) - 2.0 * c + at(k, j + 1, i)) / scale_t);
                }
                if i > 0 && i + 1 < nx {
                    worst = worst.min((at(k, j, i - 1) - 2.0 * c + at(k, j, i + 1)) / scale_x);
                }
            }
        }
    }
    worst
}

/// Sup-norm distance between two fields on the same grid.
pub fn sup_distance(a: &ValueField, b: &ValueField) -> f64 {
    a.values()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Empirical continuity moduli over adjacent and stride-2 node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliReport {
    /// `max |dV| / |dx|`.
    pub x_lipschitz: f64,
    /// `max |dV| / |dt|^(1/2)` over pairs with `|dt| <= delta`.
    pub t_holder_local: f64,
    /// Same quotient including time strides `m` and `2m`.
    pub t_holder_global: f64,
    /// `max |dV| / |d(r ^ delta)|^(1/2)`.
    pub r_holder: f64,
}

pub fn continuity_moduli(field: &ValueField) -> ModuliReport {
    let g = field.grid;
    let (nt, nr, nx) = node_count(&g);
    let flat = to_flat(field);
    let at = |k: usize, j: usize, i: usize| flat[(k * nr + j) * nx + i];
    let (dt, dx) = (g.dt(), g.dx());

    let mut x_lip: f64 = 0.0;
    let mut r_hold: f64 = 0.0;
    let mut t_local: f64 = 0.0;
    let mut t_global: f64 = 0.0;
    let mut t_strides = vec![1usize, 2, g.m, 2 * g.m];
    t_strides.sort_unstable();
    t_strides.dedup();

    for k in 0..nt {
        for j in 0..nr {
            for i in 0..nx {
                let c = at(k, j, i);
                for s in [1usize, 2] {
                    if i + s < nx {
                        x_lip = x_lip.max((at(k, j, i + s) - c).abs() / (s as f64 * dx));
                    }
                    if j + s < nr {
                        r_hold = r_hold.max((at(k, j + s, i) - c).abs() / (s as f64 * dt).sqrt());
                    }
                }
                for &s in &t_strides {
                    if k + s < nt {
                        let q = (at(k + s, j, i) - c).abs() / (s as f64 * dt).sqrt();
                        t_global = t_global.max(q);
                        if s as f64 * dt <= g.delta + 1e-12 {
                            t_local = t_local.max(q);
                        }
                    }
                }
            }
        }
    }
    ModuliReport {
        x_lipschitz: x_lip,
        t_holder_local: t_local,
        t_holder_global: t_global,
        r_holder: r_hold,
    }
}

#[cfg(test)]
mod tests;
