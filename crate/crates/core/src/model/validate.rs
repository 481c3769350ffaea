//! Sampled checks of the standing hypotheses on a problem instance.
//!
//! Bounds and Lipschitz quotients of `b, sigma, g, h` are compared against
//! `L`; the impulse cost is checked for coercivity, monotonicity in time and
//! strict subadditivity on the cone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::ProblemSpec;
use crate::error::{Error, Result};

/// Sample point at which a clause was worst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: f64,
    /// Second state, time or impulse depending on the clause.
    pub other: f64,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub passed: bool,
    /// Worst sampled value of the checked quantity (a bound, a quotient, or a
    /// margin, see `limit`).
    pub worst: f64,
    /// Threshold the worst value is compared with.
    pub limit: f64,
    /// Present when the clause failed.
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub seed: u64,
    pub clauses: Vec<ClauseResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| !c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

// Relative slack on the comparisons; sampled quotients of clamped affine maps
// hit the declared slope up to rounding.
const SLACK: f64 = 1e-9;

/// Tracks the worst (largest) sampled value and where it occurred.
struct Worst {
    value: f64,
    at: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: None,
        }
    }

    fn push(&mut self, value: f64, at: Witness) {
        if value > self.value {
            self.value = value;
            self.at = Some(at);
        }
    }

    /// Clause passes when the worst value is `<= limit`.
    fn at_most(self, clause: &str, limit: f64) -> ClauseResult {
        let passed = self.value <= limit + SLACK * limit.abs().max(1.0);
        ClauseResult {
            clause: clause.to_string(),
            passed,
            worst: self.value.max(0.0),
            limit,
            witness: if passed { None } else { self.at },
        }
    }
}

fn sample_state(rng: &mut ChaCha8Rng) -> f64 {
    // half the points near the origin, where clamped forms are steepest
    if rng.random_bool(0.5) {
        rng.random_range(-1.0..1.0)
    } else {
        rng.random_range(-10.0..10.0)
    }
}

fn sample_impulse(rng: &mut ChaCha8Rng, spec: &ProblemSpec) -> f64 {
    let signs = spec.cone.signs();
    let sign = signs[rng.random_range(0..signs.len())];
    // log-uniform magnitude in [1e-3, 1e3]
    sign * 10f64.powf(rng.random_range(-3.0..3.0))
}

pub fn validate_hypotheses(
    spec: &ProblemSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    spec.check_structure()?;
    if n_samples < 100 {
        return Err(Error::config(
            "n_samples",
            format!("need at least 100 samples, got {n_samples}"),
        ));
    }
    let l = spec.lipschitz;
    let horizon = spec.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut drift_bound = Worst::new();
    let mut drift_lip = Worst::new();
    let mut vol_bound = Worst::new();
    let mut vol_lip = Worst::new();
    let mut cost_bound = Worst::new();
    let mut cost_lip = Worst::new();
    let mut coercive = Worst::new();
    let mut time_monotone = Worst::new();
    let mut subadditive = Worst::new();

    for _ in 0..n_samples {
        let t = rng.random_range(0.0..=horizon);
        let x = sample_state(&mut rng);
        let gap = 10f64.powf(rng.random_range(-4.0..0.0));
        let x2 = if rng.random_bool(0.5) {
            x + gap
        } else {
            x - gap
        };
        let w = Witness {
            t,
            x,
            other: x2,
            xi: None,
        };

        let (b1, b2) = (spec.b(t, x), spec.b(t, x2));
        drift_bound.push(b1.abs(), w);
        drift_lip.push((b1 - b2).abs() / gap, w);
        let (s1, s2) = (spec.sigma(t, x), spec.sigma(t, x2));
        vol_bound.push(s1.abs(), w);
        vol_lip.push((s1 - s2).abs() / gap, w);
        let (g1, g2) = (spec.g(t, x), spec.g(t, x2));
        let (h1, h2) = (spec.h(x), spec.h(x2));
        cost_bound.push(g1.abs() + h1.abs(), w);
        cost_lip.push(((g1 - g2).abs() + (h1 - h2).abs()) / gap, w);

        let xi = sample_impulse(&mut rng, spec);
        let xi2 = sample_impulse(&mut rng, spec);
        let wi = Witness {
            t,
            x,
            other: xi2,
            xi: Some(xi),
        };
        // margin of l(t, xi) >= ell0 + alpha |xi|, recorded as the deficit
        coercive.push(spec.ell0 + spec.alpha * xi.abs() - spec.ell(t, xi), wi);

        let t2 = rng.random_range(0.0..=horizon);
        let (early, late) = if t <= t2 { (t, t2) } else { (t2, t) };
        time_monotone.push(
            spec.ell(late, xi) - spec.ell(early, xi),
            Witness {
                t: early,
                x,
                other: late,
                xi: Some(xi),
            },
        );

        // strict: l(t, xi + xi') < l(t, xi) + l(t, xi'); record the non-strict excess
        let combined = spec.ell(t, xi + xi2);
        let split = spec.ell(t, xi) + spec.ell(t, xi2);
        subadditive.push(combined - split, wi);
    }

    let mut clauses = vec![
        drift_bound.at_most("drift-bound", l),
        drift_lip.at_most("drift-lipschitz", l),
        vol_bound.at_most("vol-bound", l),
        vol_lip.at_most("vol-lipschitz", l),
        cost_bound.at_most("cost-bound", l),
        cost_lip.at_most("cost-lipschitz", l),
        coercive.at_most("coercivity", 0.0),
        time_monotone.at_most("cost-time-monotone", 0.0),
    ];
    let sub_worst = subadditive.value;
    clauses.push(ClauseResult {
        clause: "subadditivity".to_string(),
        passed: sub_worst < 0.0,
        worst: sub_worst,
        limit: 0.0,
        witness: if sub_worst < 0.0 {
            None
        } else {
            subadditive.at
        },
    });
    Ok(ValidationReport {
        n_samples,
        seed,
        clauses,
    })
}
