//! Optimal impulse policy read off the active obstacle set of the free layer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ValueField};
use crate::hjb::{intervention_slice, terminal_slice};
use crate::model::ProblemSpec;
use crate::numeric::fmt17;

// Tolerance on "r >= delta" and "t == T" comparisons of accumulated times.
pub(crate) const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Wait,
    Impulse(f64),
}

/// Per-node action map over `(t_k, x_i)`; row `k = n_t` holds the terminal
/// decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub grid: Grid,
    pub act: Vec<bool>,
    pub xi_star: Vec<Option<f64>>,
    pub tol: f64,
}

impl PolicyTable {
    fn idx(&self, k: usize, i: usize) -> usize {
        k * self.grid.nx_nodes() + i
    }

    pub fn is_active(&self, k: usize, i: usize) -> bool {
        self.act[self.idx(k, i)]
    }

    pub fn impulse_at(&self, k: usize, i: usize) -> Option<f64> {
        let n = self.idx(k, i);
        if self.act[n] {
            self.xi_star[n]
        } else {
            None
        }
    }

    /// Active nodes of time row `k`.
    pub fn active_row(&self, k: usize) -> &[bool] {
        let nx = self.grid.nx_nodes();
        &self.act[k * nx..(k + 1) * nx]
    }

    /// CSV with columns `t,x,act,xi_star` (`xi_star` empty where inactive).
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = String::from("t,x,act,xi_star\n");
        for k in 0..=g.n_t {
            for i in 0..=g.n_x {
                let xi = self.impulse_at(k, i).map(fmt17).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    fmt17(g.t(k)),
                    fmt17(g.x(i)),
                    u8::from(self.is_active(k, i)),
                    xi
                );
            }
        }
        s
    }
}

/// Default active-set tolerance `10 * pde_residual_sup + 1e-10`.
pub fn default_tol(pde_residual_sup: f64) -> f64 {
    10.0 * pde_residual_sup + 1e-10
}

/// Marks free-layer nodes with `v0 >= N[V] - tol`; `xi_star` is the
/// intervention argmin (smallest `|xi|` among ties).
pub fn extract_policy(field: &ValueField, spec: &ProblemSpec, tol: f64) -> Result<PolicyTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::config(
            "tol",
            format!("active-set tolerance must be > 0, got {tol}"),
        ));
    }
    let grid = field.grid;
    let nx = grid.nx_nodes();
    let mut act = vec![false; (grid.n_t + 1) * nx];
    let mut xi_star = vec![None; (grid.n_t + 1) * nx];
    for k in 0..grid.n_t {
        let jumps = intervention_slice(field, spec, k);
        let v0 = field.free(k);
        for i in 0..nx {
            if jumps[i].xi.is_some() && v0[i] >= jumps[i].value - tol {
                act[k * nx + i] = true;
                xi_star[k * nx + i] = jumps[i].xi;
            }
        }
    }
    let (_, terminal_jumps) = terminal_slice(spec, &grid);
    let k = grid.n_t;
    for i in 0..nx {
        let h = spec.h(grid.x(i));
        let jump = terminal_jumps[i];
        if jump.xi.is_some() && h >= jump.value - tol {
            act[k * nx + i] = true;
            xi_star[k * nx + i] = jump.xi;
        }
    }
    Ok(PolicyTable {
        grid,
        act,
        xi_star,
        tol,
    })
}

/// Feedback decision at `(t, r, x)` using the nearest node.
///
/// Before the horizon an impulse requires `r >= delta`; at `t = T` the
/// terminal row is consulted regardless of `r`.
pub fn decide(policy: &PolicyTable, t: f64, r: f64, x: f64) -> Action {
    let g = &policy.grid;
    let terminal = t >= g.horizon - TIME_EPS;
    if !terminal && r < g.delta - TIME_EPS {
        return Action::Wait;
    }
    let k = if terminal {
        g.n_t
    } else {
        g.nearest_t(t).min(g.n_t - 1)
    };
    match policy.impulse_at(k, g.nearest_x(x)) {
        Some(xi) => Action::Impulse(xi),
        None => Action::Wait,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub tau: f64,
    pub xi: f64,
}

/// Ordered impulse times and sizes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpulseSchedule {
    pub impulses: Vec<Impulse>,
}

impl ImpulseSchedule {
    pub fn new(pairs: &[(f64, f64)]) -> Self {
        Self {
            impulses: pairs.iter().map(|&(tau, xi)| Impulse { tau, xi }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.impulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulses.is_empty()
    }

    /// CSV with columns `tau,xi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,xi\n");
        for imp in &self.impulses {
            let _ = writeln!(s, "{},{}", fmt17(imp.tau), fmt17(imp.xi));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("tau,xi") => {}
            other => {
                return Err(Error::Parse(format!(
                    "schedule CSV: expected header `tau,xi`, found {other:?}"
                )))
            }
        }
        let mut impulses = Vec::new();
        for line in lines {
            let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next(), cols.next()) {
                (Some(Ok(tau)), Some(Ok(xi)), None) => impulses.push(Impulse { tau, xi }),
                _ => return Err(Error::Parse(format!("schedule CSV: bad row `{line}`"))),
            }
        }
        Ok(Self { impulses })
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_csv(&fs::read_to_string(path)?)
    }
}
