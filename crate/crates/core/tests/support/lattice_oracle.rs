//! Exhaustive dynamic program for the lag-constrained problem on a binomial
//! lattice. Written as a direct recursion over `(k, s, i)` where `s` counts
//! steps since the last impulse (capped at `m`), with no reference to the
//! layered solver.

use std::collections::HashMap;

use lagqvi::ProblemSpec;

pub struct LatticeOracle {
    spec: ProblemSpec,
    n_t: usize,
    m: usize,
    n_x: usize,
    x_lo: f64,
    dx: f64,
    dt: f64,
    memo: HashMap<(usize, usize, usize), f64>,
}

impl LatticeOracle {
    /// Requires zero drift and `sigma^2 dt = dx^2` at every node, so that the
    /// diffusion step is a fair +-dx coin flip.
    pub fn new(spec: &ProblemSpec, n_t: usize, n_x: usize, x_lo: f64, x_hi: f64) -> Self {
        let dt = spec.horizon / n_t as f64;
        let dx = (x_hi - x_lo) / n_x as f64;
        let m = (spec.delta / dt).round() as usize;
        assert!(
            (m as f64 * dt - spec.delta).abs() < 1e-12,
            "lag not on the lattice"
        );
        for k in 0..n_t {
            for i in 0..=n_x {
                let (t, x) = (k as f64 * dt, x_lo + i as f64 * dx);
                assert_eq!(spec.b(t, x), 0.0, "lattice needs zero drift");
                let s = spec.sigma(t, x);
                assert!(
                    (s * s * dt / (dx * dx) - 1.0).abs() < 1e-12,
                    "not a binomial lattice"
                );
            }
        }
        Self {
            spec: spec.clone(),
            n_t,
            m,
            n_x,
            x_lo,
            dx,
            dt,
            memo: HashMap::new(),
        }
    }

    pub fn lag_steps(&self) -> usize {
        self.m
    }

    fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.dx
    }

    fn destinations(&self, i: usize) -> Vec<(usize, f64)> {
        (0..=self.n_x)
            .filter(|&d| d != i)
            .map(|d| (d, (d as f64 - i as f64) * self.dx))
            .filter(|&(_, xi)| self.spec.cone.contains(xi))
            .collect()
    }

    /// Optimal cost from time step `k`, `s` steps after the last impulse,
    /// at node `i`.
    pub fn value(&mut self, k: usize, s: usize, i: usize) -> f64 {
        let s = s.min(self.m);
        if let Some(&v) = self.memo.get(&(k, s, i)) {
            return v;
        }
        let v = if k == self.n_t {
            let stay = self.spec.h(self.x(i));
            self.destinations(i)
                .into_iter()
                .map(|(d, xi)| self.spec.h(self.x(d)) + self.spec.ell(self.spec.horizon, xi))
                .fold(stay, f64::min)
        } else {
            let t = k as f64 * self.dt;
            let next_s = (s + 1).min(self.m);
            let expected = if i == 0 || i == self.n_x {
                self.value(k + 1, next_s, i)
            } else {
                0.5 * self.value(k + 1, next_s, i - 1) + 0.5 * self.value(k + 1, next_s, i + 1)
            };
            let wait = expected + self.dt * self.spec.g(t, self.x(i));
            if s < self.m {
                wait
            } else {
                let mut best = wait;
                for (d, xi) in self.destinations(i) {
                    let jump = self.spec.ell(t, xi) + self.value(k, 0, d);
                    best = best.min(jump);
                }
                best
            }
        };
        self.memo.insert((k, s, i), v);
        v
    }
}
