//! Euler–Maruyama simulation of the impulse-controlled diffusion, Monte
//! Carlo cost estimation and dynamic-programming checks against a solved
//! field.
//!
//! Every path draws from its own ChaCha stream derived from the base seed and
//! the path index, and per-path costs are reduced in index order with
//! compensated summation, so results do not depend on the thread count.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate, ValueField};
use crate::model::ProblemSpec;
use crate::numeric::{fmt17, mean_and_stderr, CompensatedSum};
use crate::policy::{decide, Action, Impulse, ImpulseSchedule, PolicyTable, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt_sim: f64,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    /// Number of leading paths whose trajectories are kept.
    #[serde(default)]
    pub retain_paths: usize,
}

impl McConfig {
    pub fn new(n_paths: usize, dt_sim: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt_sim,
            seed,
            antithetic: false,
            retain_paths: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::config("mc.n_paths", "must be >= 1"));
        }
        if !(self.dt_sim > 0.0 && self.dt_sim.is_finite()) {
            return Err(Error::config("mc.dt_sim", "must be > 0"));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::config(
                "mc.n_paths",
                "antithetic sampling needs an even path count",
            ));
        }
        Ok(())
    }
}

/// How infeasible impulses emitted by a controller are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Abort with [`Error::Admissibility`].
    #[default]
    Strict,
    /// Drop the impulse and log it.
    Tolerant,
}

/// Initial triple `(t, r, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub t: f64,
    pub r: f64,
    pub x: f64,
}

impl InitialState {
    pub fn new(t: f64, r: f64, x: f64) -> Self {
        Self { t, r, x }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// No impulses at all.
    Trivial,
    /// Open-loop schedule; times are snapped to the nearest simulation step.
    Schedule(&'a ImpulseSchedule),
    /// Feedback policy from a solved field.
    Policy(&'a PolicyTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub x: f64,
    pub r: f64,
    pub impulse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub cost: f64,
    pub impulses: ImpulseSchedule,
    /// Impulses dropped in tolerant mode.
    pub rejected: Vec<Impulse>,
    pub path: Option<Vec<PathPoint>>,
}

#[derive(Debug, Clone, Copy)]
pub struct PathOptions {
    pub dt_sim: f64,
    pub mode: Mode,
    pub record: bool,
    /// Negates every Gaussian draw (antithetic partner).
    pub negate_noise: bool,
}

/// Random stream for path `index` under base seed `seed`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn step_count(from: f64, to: f64, dt: f64) -> Result<usize> {
    let steps = (to - from) / dt;
    let n = steps.round();
    if n < 0.0 || (steps - n).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "interval [{from}, {to}] is not a whole number of simulation steps of {dt}"
        )));
    }
    Ok(n as usize)
}

/// Simulates one path from `init` to the horizon.
///
/// At each simulation time the controller is consulted first (including the
/// initial time and the horizon), then running cost accrues and the state
/// takes an Euler–Maruyama step. Impulses at the horizon are exempt from the
/// lag and collapse into one combined impulse.
pub fn simulate_path(
    spec: &ProblemSpec,
    init: InitialState,
    controller: Controller<'_>,
    opts: PathOptions,
    rng: &mut dyn RngCore,
) -> Result<PathOutcome> {
    let dt = opts.dt_sim;
    let horizon = spec.horizon;
    if init.t < 0.0 || init.t > horizon + TIME_EPS || init.r < 0.0 {
        return Err(Error::Precondition(format!(
            "initial triple ({}, {}, {}) outside [0, T] x [0, T] x R",
            init.t, init.r, init.x
        )));
    }
    let n_steps = step_count(init.t, horizon, dt)?;

    let snapped: Vec<(usize, f64)> = match controller {
        Controller::Schedule(s) => s
            .impulses
            .iter()
            .map(|imp| {
                let pos = (imp.tau - init.t) / dt;
                if pos < -0.5 || imp.tau > horizon + TIME_EPS {
                    return Err(Error::Admissibility(format!(
                        "impulse time {} outside [{}, {}]",
                        imp.tau, init.t, horizon
                    )));
                }
                Ok(((pos.round() as usize).min(n_steps), imp.xi))
            })
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let mut next_scheduled = 0usize;

    let mut x = init.x;
    let mut r_base = init.r;
    let mut since = 0usize;
    let mut cost = CompensatedSum::new();
    let mut impulses = Vec::new();
    let mut rejected = Vec::new();
    let mut path = opts.record.then(Vec::new);
    let sign = if opts.negate_noise { -1.0 } else { 1.0 };

    for s in 0..=n_steps {
        let terminal = s == n_steps;
        let t = if terminal {
            horizon
        } else {
            init.t + s as f64 * dt
        };
        let r = r_base + since as f64 * dt;

        let mut requests: Vec<f64> = Vec::new();
        match controller {
            Controller::Trivial => {}
            Controller::Schedule(_) => {
                while next_scheduled < snapped.len() && snapped[next_scheduled].0 == s {
                    requests.push(snapped[next_scheduled].1);
                    next_scheduled += 1;
                }
            }
            Controller::Policy(p) => {
                if let Action::Impulse(xi) = decide(p, t, r, x) {
                    requests.push(xi);
                }
            }
        }
        if terminal && requests.len() > 1 {
            let total: f64 = requests.iter().sum();
            requests = if total == 0.0 {
                Vec::new()
            } else {
                vec![total]
            };
        }

        let mut fired = None;
        let mut r_now = r;
        for xi in requests {
            let reason = if xi == 0.0 || !spec.cone.contains(xi) {
                Some(format!("impulse {xi} at t = {t} is not in K \\ {{0}}"))
            } else if !terminal && r_now < spec.delta - TIME_EPS {
                Some(format!(
                    "impulse at t = {t} with elapsed time {r_now} < delta = {}",
                    spec.delta
                ))
            } else {
                None
            };
            if let Some(reason) = reason {
                match opts.mode {
                    Mode::Strict => return Err(Error::Admissibility(reason)),
                    Mode::Tolerant => {
                        log::debug!("rejected: {reason}");
                        rejected.push(Impulse { tau: t, xi });
                        continue;
                    }
                }
            }
            x += xi;
            cost.add(spec.ell(t, xi));
            impulses.push(Impulse { tau: t, xi });
            r_base = 0.0;
            since = 0;
            r_now = 0.0;
            fired = Some(fired.unwrap_or(0.0) + xi);
        }

        if let Some(p) = path.as_mut() {
            p.push(PathPoint {
                t,
                x,
                r: r_base + since as f64 * dt,
                impulse: fired,
            });
        }
        if terminal {
            cost.add(spec.h(x));
            break;
        }
        cost.add(spec.g(t, x) * dt);
        let z: f64 = StandardNormal.sample(rng);
        x += spec.b(t, x) * dt + spec.sigma(t, x) * dt.sqrt() * (sign * z);
        since += 1;
    }

    Ok(PathOutcome {
        cost: cost.total(),
        impulses: ImpulseSchedule { impulses },
        rejected,
        path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedPath {
    pub path_id: usize,
    pub points: Vec<PathPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_cost: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// `impulse_histogram[n]` = number of paths with exactly `n` impulses.
    pub impulse_histogram: Vec<usize>,
    /// Largest number of impulses strictly before the horizon on any path.
    pub max_nonterminal_impulses: usize,
    pub rejected: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub paths: Vec<RetainedPath>,
}

impl SimResult {
    /// `{mean, stderr, n_paths, impulse_histogram}`.
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "mean": self.mean_cost,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "impulse_histogram": self.impulse_histogram,
        });
        serde_json::to_string_pretty(&doc).expect("json") + "\n"
    }

    /// CSV with columns `path_id,t,x,r,impulse_flag,xi`.
    pub fn paths_csv(&self) -> String {
        let mut s = String::from("path_id,t,x,r,impulse_flag,xi\n");
        for p in &self.paths {
            for pt in &p.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    p.path_id,
                    fmt17(pt.t),
                    fmt17(pt.x),
                    fmt17(pt.r),
                    u8::from(pt.impulse.is_some()),
                    fmt17(pt.impulse.unwrap_or(0.0))
                );
            }
        }
        s
    }
}

/// Upper bound `floor((T - t) / delta) + 1` on impulses strictly before `T`.
pub fn nonterminal_impulse_bound(spec: &ProblemSpec, t: f64) -> usize {
    ((spec.horizon - t) / spec.delta + TIME_EPS).floor() as usize + 1
}

/// Monte Carlo estimate of the cost functional of `controller` from `init`.
pub fn estimate_cost(
    spec: &ProblemSpec,
    init: InitialState,
    controller: Controller<'_>,
    mc: &McConfig,
    mode: Mode,
) -> Result<SimResult> {
    mc.check()?;
    let outcomes: Vec<PathOutcome> = (0..mc.n_paths)
        .into_par_iter()
        .map(|i| {
            let (stream, negate) = if mc.antithetic {
                ((i / 2) as u64, i % 2 == 1)
            } else {
                (i as u64, false)
            };
            let mut rng = path_stream(mc.seed, stream);
            let opts = PathOptions {
                dt_sim: mc.dt_sim,
                mode,
                record: i < mc.retain_paths,
                negate_noise: negate,
            };
            simulate_path(spec, init, controller, opts, &mut rng)
        })
        .collect::<Result<_>>()?;

    let costs: Vec<f64> = outcomes.iter().map(|o| o.cost).collect();
    let samples: Vec<f64> = if mc.antithetic {
        costs.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    } else {
        costs
    };
    let (mean_cost, stderr) = mean_and_stderr(&samples);

    let mut impulse_histogram = Vec::new();
    let mut max_nonterminal = 0;
    for o in &outcomes {
        let n = o.impulses.len();
        if impulse_histogram.len() <= n {
            impulse_histogram.resize(n + 1, 0);
        }
        impulse_histogram[n] += 1;
        let before_t = o
            .impulses
            .impulses
            .iter()
            .filter(|imp| imp.tau < spec.horizon - TIME_EPS)
            .count();
        max_nonterminal = max_nonterminal.max(before_t);
    }
    let paths = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            o.path.as_ref().map(|p| RetainedPath {
                path_id: i,
                points: p.clone(),
            })
        })
        .collect();

    Ok(SimResult {
        mean_cost,
        stderr: if stderr.is_nan() { 0.0 } else { stderr },
        n_paths: mc.n_paths,
        impulse_histogram,
        max_nonterminal_impulses: max_nonterminal,
        rejected: outcomes.iter().map(|o| o.rejected.len()).sum(),
        paths,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// Index of the first offending impulse.
    pub index: Option<usize>,
    pub violation: Option<String>,
}

impl AdmissibilityReport {
    fn ok() -> Self {
        Self {
            admissible: true,
            index: None,
            violation: None,
        }
    }

    fn fail(index: usize, violation: String) -> Self {
        Self {
            admissible: false,
            index: Some(index),
            violation: Some(violation),
        }
    }
}

/// Checks a schedule started from `(t, r)` against the lag rules: the first
/// impulse waits until `(t + delta - r) v t`, later ones keep a gap of
/// `delta` unless they happen at `T`, and every size lies in `K \ {0}`.
pub fn check_admissible(
    schedule: &ImpulseSchedule,
    spec: &ProblemSpec,
    t: f64,
    r: f64,
) -> AdmissibilityReport {
    let horizon = spec.horizon;
    let delta = spec.delta;
    let at_horizon = |tau: f64| (tau - horizon).abs() <= TIME_EPS;
    let mut prev: Option<f64> = None;
    for (i, imp) in schedule.impulses.iter().enumerate() {
        if imp.xi == 0.0 || !spec.cone.contains(imp.xi) {
            return AdmissibilityReport::fail(
                i,
                format!("impulse size {} is not in K \\ {{0}}", imp.xi),
            );
        }
        if imp.tau < t - TIME_EPS || imp.tau > horizon + TIME_EPS {
            return AdmissibilityReport::fail(
                i,
                format!("time {} outside [{t}, {horizon}]", imp.tau),
            );
        }
        match prev {
            None => {
                let earliest = (t + delta - r).max(t);
                if imp.tau < earliest - TIME_EPS && !at_horizon(imp.tau) {
                    return AdmissibilityReport::fail(
                        i,
                        format!(
                            "first impulse at {} before earliest admissible time {earliest}",
                            imp.tau
                        ),
                    );
                }
            }
            Some(p) => {
                if imp.tau < p - TIME_EPS {
                    return AdmissibilityReport::fail(
                        i,
                        format!("time {} precedes previous impulse {p}", imp.tau),
                    );
                }
                if !at_horizon(imp.tau) && imp.tau < p + delta - TIME_EPS {
                    return AdmissibilityReport::fail(
                        i,
                        format!(
                            "gap {} to previous impulse is below delta = {delta}",
                            imp.tau - p
                        ),
                    );
                }
            }
        }
        prev = Some(imp.tau);
    }
    AdmissibilityReport::ok()
}

/// Which dynamic-programming relation applies at the initial triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DppRegime {
    /// `r < delta`, `s < t + delta - r`: no impulse is possible, equality.
    Equality,
    /// `r >= delta`: waiting is one option, `V0 <= E[...]`.
    Inequality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppReport {
    pub regime: DppRegime,
    pub mc_value: f64,
    pub field_value: f64,
    /// `mc_value - field_value`.
    pub residual: f64,
    pub stderr: f64,
    /// `N[V](t, 0, x) - V0(t, x)` in the inequality regime.
    pub obstacle_gap: Option<f64>,
}

/// Intervention value at an off-grid state: destinations are the grid nodes,
/// the `r = 0` layer is interpolated in time.
fn intervention_off_grid(field: &ValueField, spec: &ProblemSpec, t: f64, x: f64) -> f64 {
    let g = &field.grid;
    let mut best = f64::INFINITY;
    for j in 0..=g.n_x {
        let xi = g.x(j) - x;
        if xi == 0.0 || !spec.cone.contains(xi) {
            continue;
        }
        best = best.min(interpolate(field, t, 0.0, g.x(j)) + spec.ell(t, xi));
    }
    best
}

/// Compares the field against `E[int_t^s g dt + V(s, r + s - t, X0(s))]`
/// along the uncontrolled flow.
pub fn dpp_check(
    field: &ValueField,
    spec: &ProblemSpec,
    init: InitialState,
    s: f64,
    mc: &McConfig,
) -> Result<DppReport> {
    mc.check()?;
    let InitialState { t, r, x } = init;
    let regime = if r < spec.delta - TIME_EPS {
        if !(s >= t - TIME_EPS && s < t + spec.delta - r - TIME_EPS) {
            return Err(Error::Precondition(format!(
                "equality case (r = {r} < delta) needs s in [t, t + delta - r) = [{t}, {}), got s = {s}",
                t + spec.delta - r
            )));
        }
        DppRegime::Equality
    } else {
        if !(s >= t - TIME_EPS && s <= spec.horizon + TIME_EPS) {
            return Err(Error::Precondition(format!(
                "inequality case (r >= delta) needs s in [t, T] = [{t}, {}], got s = {s}",
                spec.horizon
            )));
        }
        DppRegime::Inequality
    };
    let n_steps = step_count(t, s, mc.dt_sim)?;
    let dt = mc.dt_sim;
    let samples: Vec<f64> = (0..mc.n_paths)
        .into_par_iter()
        .map(|i| {
            let (stream, sign) = if mc.antithetic {
                ((i / 2) as u64, if i % 2 == 1 { -1.0 } else { 1.0 })
            } else {
                (i as u64, 1.0)
            };
            let mut rng = path_stream(mc.seed, stream);
            let mut xs = x;
            let mut running = CompensatedSum::new();
            for step in 0..n_steps {
                let ts = t + step as f64 * dt;
                running.add(spec.g(ts, xs) * dt);
                let z: f64 = StandardNormal.sample(&mut rng);
                xs += spec.b(ts, xs) * dt + spec.sigma(ts, xs) * dt.sqrt() * (sign * z);
            }
            let elapsed = n_steps as f64 * dt;
            running.total() + interpolate(field, t + elapsed, r + elapsed, xs)
        })
        .collect();
    let samples: Vec<f64> = if mc.antithetic {
        samples.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    } else {
        samples
    };
    let (mc_value, stderr) = mean_and_stderr(&samples);
    let field_value = interpolate(field, t, r, x);
    let obstacle_gap = (regime == DppRegime::Inequality)
        .then(|| intervention_off_grid(field, spec, t, x) - field_value);
    Ok(DppReport {
        regime,
        mc_value,
        field_value,
        residual: mc_value - field_value,
        stderr: if stderr.is_nan() { 0.0 } else { stderr },
        obstacle_gap,
    })
}

/// Sampled `E[sup_s |X(s) - X^(s)|] / |x - x^|` for two starts driven by the
/// same noise and the same open-loop schedule.
pub fn state_sensitivity(
    spec: &ProblemSpec,
    t: f64,
    x: f64,
    x_hat: f64,
    schedule: &ImpulseSchedule,
    mc: &McConfig,
) -> Result<f64> {
    mc.check()?;
    if x == x_hat {
        return Err(Error::Precondition(
            "the two initial states must differ".into(),
        ));
    }
    let n_steps = step_count(t, spec.horizon, mc.dt_sim)?;
    let dt = mc.dt_sim;
    let sups: Vec<f64> = (0..mc.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_stream(mc.seed, i as u64);
            let (mut a, mut b) = (x, x_hat);
            let mut sup = (a - b).abs();
            for step in 0..=n_steps {
                let ts = t + step as f64 * dt;
                for imp in &schedule.impulses {
                    if ((imp.tau - ts) / dt).abs() < 0.5 {
                        a += imp.xi;
                        b += imp.xi;
                    }
                }
                if step == n_steps {
                    break;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                let dw = dt.sqrt() * z;
                a += spec.b(ts, a) * dt + spec.sigma(ts, a) * dw;
                b += spec.b(ts, b) * dt + spec.sigma(ts, b) * dw;
                sup = sup.max((a - b).abs());
            }
            sup
        })
        .collect();
    let (mean, _) = mean_and_stderr(&sups);
    Ok(mean / (x - x_hat).abs())
}

#[cfg(test)]
mod tests;
