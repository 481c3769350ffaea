//! One-shot verification pipeline. Every artifact is written first and the
//! verdict is then computed from the files as read back from disk.

use lagqvi::grid::interpolate;
use lagqvi::simulate::{DppReport, InitialState};
use lagqvi::{dpp_check, estimate_cost, Controller, ResidualReport, ValueField};
use serde::{Deserialize, Serialize};

use crate::commands::{self, Run, MODULI_FILE, RESIDUALS_FILE};
use crate::error::{CliError, CliResult};
use lagqvi::analysis::ModuliReport;

pub const SPOT_SIM_FILE: &str = "report_sim.json";
pub const SPOT_DPP_FILE: &str = "report_dpp.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotSimulation {
    pub x: f64,
    pub policy_mean: f64,
    pub policy_stderr: f64,
    pub trivial_mean: f64,
    pub trivial_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotDpp {
    pub t: f64,
    pub r: f64,
    pub x: f64,
    pub s: f64,
    pub report: DppReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst measured quantity, compared against `limit`.
    pub measured: f64,
    pub limit: f64,
}

impl Check {
    fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: measured <= limit,
            measured,
            limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub verdict: String,
    pub spec_hash: String,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

/// States probed by the spot checks: `x in {-1, 0, 1}` away from the edges.
pub fn spot_states(run: &Run) -> Vec<f64> {
    let g = run.cfg.grid;
    let margin = 4.0 * (g.x_hi - g.x_lo) / g.n_x as f64;
    [-1.0, 0.0, 1.0]
        .into_iter()
        .filter(|&x| x > g.x_lo + margin && x < g.x_hi - margin)
        .collect()
}

/// A horizon `s` for the dynamic-programming checks: about half a lag, on
/// the simulation step.
fn dpp_horizon(run: &Run) -> f64 {
    let dt = run.cfg.mc.dt_sim;
    let steps = (0.5 * run.cfg.problem.delta / dt).round().max(1.0);
    steps * dt
}

fn run_spot_checks(run: &Run) -> CliResult<()> {
    let spec = &run.cfg.problem;
    let field = run.field()?;
    let table = commands::policy(run)?;
    let mc = run.cfg.mc;
    let mut sims = Vec::new();
    let mut dpps = Vec::new();
    let s = dpp_horizon(run);
    for x in spot_states(run) {
        let init = InitialState::new(0.0, spec.delta, x);
        let p = estimate_cost(spec, init, Controller::Policy(&table), &mc, run.cfg.mode)?;
        let t = estimate_cost(spec, init, Controller::Trivial, &mc, run.cfg.mode)?;
        sims.push(SpotSimulation {
            x,
            policy_mean: p.mean_cost,
            policy_stderr: p.stderr,
            trivial_mean: t.mean_cost,
            trivial_stderr: t.stderr,
        });
        for r in [0.0, spec.delta] {
            let init = InitialState::new(0.0, r, x);
            dpps.push(SpotDpp {
                t: 0.0,
                r,
                x,
                s,
                report: dpp_check(&field, spec, init, s, &mc)?,
            });
        }
    }
    std::fs::write(run.path(SPOT_SIM_FILE), commands::to_json(&sims))
        .map_err(lagqvi::Error::from)?;
    std::fs::write(run.path(SPOT_DPP_FILE), commands::to_json(&dpps))
        .map_err(lagqvi::Error::from)?;
    commands::moduli(run)?;
    Ok(())
}

fn lag_monotonicity_breach(field: &ValueField) -> f64 {
    let g = field.grid;
    let mut worst: f64 = 0.0;
    for k in 0..=g.n_t {
        for j in 0..g.m {
            for (a, b) in field.layer(k, j).iter().zip(field.layer(k, j + 1)) {
                worst = worst.max(b - a);
            }
        }
    }
    worst
}

/// Builds the verdict from the persisted artifacts only.
pub fn verdict_from_disk(run: &Run) -> CliResult<Verdict> {
    let spec = &run.cfg.problem;
    let field = run.field()?;
    let residual: ResidualReport = run.read_json(RESIDUALS_FILE)?;
    let sims: Vec<SpotSimulation> = run.read_json(SPOT_SIM_FILE)?;
    let dpps: Vec<SpotDpp> = run.read_json(SPOT_DPP_FILE)?;
    let moduli: ModuliReport = run.read_json(MODULI_FILE)?;
    let g = field.grid;
    let mesh = g.dt() + g.dx();

    let mut checks = vec![
        Check::at_most("value_bound", field.sup_norm(), spec.value_bound() + 1e-8),
        Check::at_most(
            "obstacle",
            residual.obstacle_violation_sup,
            field.meta.obstacle_tol,
        ),
        Check::at_most("residual", residual.pde_residual_sup, 1e-8),
        Check::at_most("lag_monotonicity", lag_monotonicity_breach(&field), 0.0),
    ];

    // excess of |MC - V| over its allowance, <= 0 when consistent
    let mut policy_excess = f64::NEG_INFINITY;
    let mut trivial_excess = f64::NEG_INFINITY;
    for sim in &sims {
        let v = interpolate(&field, 0.0, spec.delta, sim.x);
        policy_excess =
            policy_excess.max((sim.policy_mean - v).abs() - 3.0 * sim.policy_stderr - 10.0 * mesh);
        trivial_excess = trivial_excess.max(v - 3.0 * sim.trivial_stderr - sim.trivial_mean);
    }
    checks.push(Check::at_most(
        "policy_consistency",
        policy_excess.max(0.0),
        0.0,
    ));
    checks.push(Check::at_most(
        "trivial_upper_bound",
        trivial_excess.max(0.0),
        0.0,
    ));

    for (name, regime) in [
        ("dpp_equality", lagqvi::simulate::DppRegime::Equality),
        ("dpp_inequality", lagqvi::simulate::DppRegime::Inequality),
    ] {
        let mut excess: f64 = 0.0;
        for d in dpps.iter().filter(|d| d.report.regime == regime) {
            let allowance = 3.0 * d.report.stderr + 5.0 * mesh;
            let dev = match regime {
                lagqvi::simulate::DppRegime::Equality => d.report.residual.abs(),
                // waiting is only one option: V0 <= E[...] up to the allowance
                lagqvi::simulate::DppRegime::Inequality => -d.report.residual,
            };
            excess = excess.max(dev - allowance);
            if let Some(gap) = d.report.obstacle_gap {
                excess = excess.max(-gap - field.meta.obstacle_tol);
            }
        }
        checks.push(Check::at_most(name, excess, 0.0));
    }

    let non_finite = [
        moduli.x_lipschitz,
        moduli.t_holder_local,
        moduli.t_holder_global,
        moduli.r_holder,
    ]
    .iter()
    .filter(|v| !v.is_finite())
    .count();
    checks.push(Check::at_most("moduli_finite", non_finite as f64, 0.0));

    let passed = checks.iter().all(|c| c.passed);
    Ok(Verdict {
        verdict: if passed { "pass" } else { "fail" }.into(),
        spec_hash: spec.hash(),
        checks,
    })
}

/// solve -> residuals -> policy -> policy simulation -> DPP spot checks ->
/// moduli -> verdict.
pub fn report(run: &Run) -> CliResult<Verdict> {
    commands::solve_field(run)?;
    run_spot_checks(run)?;
    let verdict = verdict_from_disk(run)?;
    std::fs::write(run.path(REPORT_FILE), commands::to_json(&verdict))
        .map_err(lagqvi::Error::from)?;
    if !verdict.passed() {
        let failed: Vec<&str> = verdict
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Verdict(failed.join(", ")));
    }
    Ok(verdict)
}
