//! Parametric coefficient families.
//!
//! Every family is bounded and Lipschitz by construction, so a problem
//! instance can be shipped as a small JSON document and checked on samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `params = [c]`.
    Constant,
    /// `params = [a, bx]` or `[a, bx, bt]`; value `clamp(a + bx*x + bt*t, -L, L)`.
    AffineClamped,
    /// `params = [amp, kx]` plus optional `phase`, `kt`, `offset`;
    /// value `offset + amp * sin(kx*x + kt*t + phase)`.
    SinusoidalBounded,
    /// `params = [s_0..s_n, y_0..y_n]` with strictly increasing knots;
    /// piecewise-linear in the state with flat extrapolation.
    CustomTable,
}

/// A coefficient selected from the family registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientRef {
    pub family: Family,
    pub params: Vec<f64>,
}

impl CoefficientRef {
    pub fn new(family: Family, params: Vec<f64>) -> Self {
        Self { family, params }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Family::Constant, vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn affine(a: f64, bx: f64) -> Self {
        Self::new(Family::AffineClamped, vec![a, bx])
    }

    /// Piecewise-linear table through `(knots[i], values[i])`.
    pub fn table(knots: &[f64], values: &[f64]) -> Self {
        let mut params = knots.to_vec();
        params.extend_from_slice(values);
        Self::new(Family::CustomTable, params)
    }

    /// Checks the parameter vector shape; `field` names the offending entry.
    pub fn check_shape(&self, field: &str) -> Result<()> {
        let p = &self.params;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(field, "parameters must be finite"));
        }
        let ok = match self.family {
            Family::Constant => p.len() == 1,
            Family::AffineClamped => (2..=3).contains(&p.len()),
            Family::SinusoidalBounded => (2..=5).contains(&p.len()),
            Family::CustomTable => {
                if p.len() < 4 || !p.len().is_multiple_of(2) {
                    false
                } else {
                    let knots = &p[..p.len() / 2];
                    if !knots.windows(2).all(|w| w[0] < w[1]) {
                        return Err(Error::config(
                            field,
                            "table knots must be strictly increasing",
                        ));
                    }
                    true
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                field,
                format!(
                    "wrong parameter count {} for family {:?}",
                    p.len(),
                    self.family
                ),
            ))
        }
    }

    /// Evaluates `f(t, x)`; affine forms are clamped to `[-bound, bound]`.
    pub fn eval(&self, t: f64, x: f64, bound: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Constant => p[0],
            Family::AffineClamped => {
                let bt = p.get(2).copied().unwrap_or(0.0);
                (p[0] + p[1] * x + bt * t).clamp(-bound, bound)
            }
            Family::SinusoidalBounded => {
                let phase = p.get(2).copied().unwrap_or(0.0);
                let kt = p.get(3).copied().unwrap_or(0.0);
                let offset = p.get(4).copied().unwrap_or(0.0);
                offset + p[0] * (p[1] * x + kt * t + phase).sin()
            }
            Family::CustomTable => table_eval(p, x),
        }
    }

    /// Evaluates a single-argument use of the family (terminal cost `h(x)`,
    /// base impulse cost `c(t)`); the argument plays the role of `x`.
    pub fn eval_1d(&self, s: f64, bound: f64) -> f64 {
        self.eval(0.0, s, bound)
    }

    /// Declared Lipschitz constant in the state argument.
    pub fn lipschitz_x(&self) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Constant => 0.0,
            Family::AffineClamped => p[1].abs(),
            Family::SinusoidalBounded => (p[0] * p[1]).abs(),
            Family::CustomTable => {
                let n = p.len() / 2;
                let (s, y) = p.split_at(n);
                (0..n - 1)
                    .map(|i| ((y[i + 1] - y[i]) / (s[i + 1] - s[i])).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Declared sup-norm bound given the clamp level.
    pub fn sup_bound(&self, bound: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Constant => p[0].abs(),
            Family::AffineClamped => bound,
            Family::SinusoidalBounded => p.get(4).copied().unwrap_or(0.0).abs() + p[0].abs(),
            Family::CustomTable => p[p.len() / 2..].iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

fn table_eval(p: &[f64], s: f64) -> f64 {
    let n = p.len() / 2;
    let (knots, values) = p.split_at(n);
    if s <= knots[0] {
        return values[0];
    }
    if s >= knots[n - 1] {
        return values[n - 1];
    }
    // first knot strictly greater than s
    let hi = knots.partition_point(|&k| k <= s);
    let lo = hi - 1;
    let w = (s - knots[lo]) / (knots[hi] - knots[lo]);
    values[lo] + w * (values[hi] - values[lo])
}
