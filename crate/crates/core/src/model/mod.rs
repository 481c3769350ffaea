//! Problem instances, the coefficient registry and hypothesis checks.

mod coefficient;
mod spec;
mod validate;

pub use coefficient::{CoefficientRef, Family};
pub use spec::{ConeDirection, ConeSpec, ImpulseCostSpec, ProblemSpec};
pub use validate::{validate_hypotheses, ClauseResult, ValidationReport, Witness};

/// `H(t, x, p, P) = b p + 1/2 sigma^2 P + g` in one dimension.
pub fn hamiltonian(spec: &ProblemSpec, t: f64, x: f64, p: f64, pp: f64) -> f64 {
    let sigma = spec.sigma(t, x);
    spec.b(t, x) * p + 0.5 * sigma * sigma * pp + spec.g(t, x)
}
