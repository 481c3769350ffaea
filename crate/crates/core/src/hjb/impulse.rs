use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, ValueField};
use crate::model::ProblemSpec;

/// Best immediate impulse from one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    /// `+inf` when no destination is feasible.
    pub value: f64,
    pub xi: Option<f64>,
    pub dest: Option<usize>,
}

impl Intervention {
    pub const INFEASIBLE: Intervention = Intervention {
        value: f64::INFINITY,
        xi: None,
        dest: None,
    };
}

/// `min_{xi in K \ {0}} values[i + xi] + l(t, xi)` over grid-aligned
/// destinations inside the domain. Destinations are scanned by increasing
/// `|xi|` (upward before downward at equal size) and only a strictly smaller
/// value replaces the incumbent, so ties go to the smallest impulse.
pub fn best_impulse(
    spec: &ProblemSpec,
    grid: &Grid,
    t: f64,
    values: &[f64],
    i: usize,
) -> Intervention {
    let n = grid.n_x as isize;
    let signs = spec.cone.signs();
    let mut best = Intervention::INFEASIBLE;
    for d in 1..=n {
        for &sign in signs {
            let step = if sign > 0.0 { d } else { -d };
            let j = i as isize + step;
            if j < 0 || j > n {
                continue;
            }
            let xi = grid.offset(step);
            let v = values[j as usize] + spec.ell(t, xi);
            if v < best.value {
                best = Intervention {
                    value: v,
                    xi: Some(xi),
                    dest: Some(j as usize),
                };
            }
        }
    }
    best
}

/// [`best_impulse`] for every node of a slice.
pub fn best_impulse_slice(
    spec: &ProblemSpec,
    grid: &Grid,
    t: f64,
    values: &[f64],
) -> Vec<Intervention> {
    (0..values.len())
        .into_par_iter()
        .map(|i| best_impulse(spec, grid, t, values, i))
        .collect()
}

/// Terminal cost on the grid nodes.
pub fn terminal_cost(spec: &ProblemSpec, grid: &Grid) -> Vec<f64> {
    (0..grid.nx_nodes()).map(|i| spec.h(grid.x(i))).collect()
}

/// Terminal value `min{h(x), min_xi h(x + xi) + l(T, xi)}` at each node, with
/// the terminal intervention (to read off the terminal decision).
///
/// Several impulses at the horizon collapse into one: strict subadditivity
/// of `l` makes a single combined impulse at least as cheap.
pub fn terminal_slice(spec: &ProblemSpec, grid: &Grid) -> (Vec<f64>, Vec<Intervention>) {
    let h = terminal_cost(spec, grid);
    let jumps = best_impulse_slice(spec, grid, spec.horizon, &h);
    let values = h
        .iter()
        .zip(&jumps)
        .map(|(&stay, jump)| if jump.value < stay { jump.value } else { stay })
        .collect();
    (values, jumps)
}

/// Intervention operator `N[V](t_k, 0, x_i)` read from the `r = 0` layer.
pub fn intervention(field: &ValueField, spec: &ProblemSpec, k: usize, i: usize) -> Intervention {
    let g = &field.grid;
    best_impulse(spec, g, g.t(k), field.layer(k, 0), i)
}

/// [`intervention`] over a whole time slice.
pub fn intervention_slice(field: &ValueField, spec: &ProblemSpec, k: usize) -> Vec<Intervention> {
    let g = &field.grid;
    best_impulse_slice(spec, g, g.t(k), field.layer(k, 0))
}
