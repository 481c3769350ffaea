use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::coefficient::{CoefficientRef, Family};
use crate::error::{Error, Result};

/// Admissible impulse directions in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeDirection {
    Nonnegative,
    Nonpositive,
    FullLine,
}

/// Closed convex cone `K` of admissible impulse sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub direction: ConeDirection,
}

impl ConeSpec {
    pub fn new(direction: ConeDirection) -> Self {
        Self { direction }
    }

    pub fn contains(&self, xi: f64) -> bool {
        match self.direction {
            ConeDirection::Nonnegative => xi >= 0.0,
            ConeDirection::Nonpositive => xi <= 0.0,
            ConeDirection::FullLine => xi.is_finite(),
        }
    }

    /// Directions (+1 / -1) along which nonzero impulses are admissible.
    pub fn signs(&self) -> &'static [f64] {
        match self.direction {
            ConeDirection::Nonnegative => &[1.0],
            ConeDirection::Nonpositive => &[-1.0],
            ConeDirection::FullLine => &[1.0, -1.0],
        }
    }
}

/// Impulse cost `l(t, xi) = c(t) + rate * |xi|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ImpulseCostDoc", into = "ImpulseCostDoc")]
pub struct ImpulseCostSpec {
    /// Base cost schedule `c(t)`, evaluated through the single-argument form.
    pub c0: CoefficientRef,
    /// Proportional rate.
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpulseCostDoc {
    c0_family: Family,
    c0_params: Vec<f64>,
    alpha: f64,
}

impl From<ImpulseCostDoc> for ImpulseCostSpec {
    fn from(d: ImpulseCostDoc) -> Self {
        Self {
            c0: CoefficientRef::new(d.c0_family, d.c0_params),
            alpha: d.alpha,
        }
    }
}

impl From<ImpulseCostSpec> for ImpulseCostDoc {
    fn from(s: ImpulseCostSpec) -> Self {
        Self {
            c0_family: s.c0.family,
            c0_params: s.c0.params,
            alpha: s.alpha,
        }
    }
}

impl ImpulseCostSpec {
    pub fn constant(c: f64, alpha: f64) -> Self {
        Self {
            c0: CoefficientRef::constant(c),
            alpha,
        }
    }
}

fn one() -> usize {
    1
}

/// A complete problem instance.
///
/// The JSON form carries exactly the keys `T, delta, L, ell0, alpha, drift,
/// vol, running, terminal, impulse_cost, cone`; the state dimension is fixed
/// to one and not serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub ell0: f64,
    pub alpha: f64,
    pub drift: CoefficientRef,
    pub vol: CoefficientRef,
    pub running: CoefficientRef,
    pub terminal: CoefficientRef,
    pub impulse_cost: ImpulseCostSpec,
    pub cone: ConeSpec,
    #[serde(skip, default = "one")]
    pub dim: usize,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)?;
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec serializes")
    }

    /// Rejects degenerate configurations, naming the offending field.
    pub fn check_structure(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, "must be finite"))
            }
        };
        finite(self.horizon, "T")?;
        finite(self.delta, "delta")?;
        finite(self.lipschitz, "L")?;
        finite(self.ell0, "ell0")?;
        finite(self.alpha, "alpha")?;
        if self.horizon <= 0.0 {
            return Err(Error::config(
                "T",
                format!("horizon must be > 0, got {}", self.horizon),
            ));
        }
        if self.delta <= 0.0 || self.delta >= self.horizon {
            return Err(Error::config(
                "delta",
                format!(
                    "need 0 < delta < T, got delta = {} with T = {}",
                    self.delta, self.horizon
                ),
            ));
        }
        if self.lipschitz <= 0.0 {
            return Err(Error::config("L", "must be > 0"));
        }
        if self.ell0 <= 0.0 {
            return Err(Error::config("ell0", "must be > 0"));
        }
        if self.alpha <= 0.0 {
            return Err(Error::config("alpha", "must be > 0"));
        }
        if self.dim != 1 {
            return Err(Error::config("dim", "only dimension 1 is supported"));
        }
        if !(self.impulse_cost.alpha.is_finite() && self.impulse_cost.alpha >= 0.0) {
            return Err(Error::config(
                "impulse_cost.alpha",
                "must be finite and >= 0",
            ));
        }
        self.drift.check_shape("drift")?;
        self.vol.check_shape("vol")?;
        self.running.check_shape("running")?;
        self.terminal.check_shape("terminal")?;
        self.impulse_cost.c0.check_shape("impulse_cost.c0")?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("problem spec serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Bound `L(T+1)` on the value function.
    pub fn value_bound(&self) -> f64 {
        self.lipschitz * (self.horizon + 1.0)
    }

    pub fn b(&self, t: f64, x: f64) -> f64 {
        self.drift.eval(t, x, self.lipschitz)
    }

    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        self.vol.eval(t, x, self.lipschitz)
    }

    pub fn g(&self, t: f64, x: f64) -> f64 {
        self.running.eval(t, x, self.lipschitz)
    }

    pub fn h(&self, x: f64) -> f64 {
        self.terminal.eval_1d(x, self.lipschitz)
    }

    /// Impulse cost `l(t, xi)`.
    pub fn ell(&self, t: f64, xi: f64) -> f64 {
        self.impulse_cost.c0.eval_1d(t, self.lipschitz) + self.impulse_cost.alpha * xi.abs()
    }

    /// Copy with a different decision lag.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }
}
