//! One function per subcommand. Each reads its inputs from the run
//! configuration and the output directory and writes its artifacts there.

use std::fs;
use std::path::{Path, PathBuf};

use lagqvi::analysis::{
    continuity_moduli, inf_convolution, lag_limit_study, min_scaled_second_difference,
    sup_convolution, sup_distance, LimitStudy, ModuliReport,
};
use lagqvi::grid::{build_grid_from, load_field, save_field};
use lagqvi::policy::default_tol;
use lagqvi::simulate::{DppReport, InitialState, Mode};
use lagqvi::{
    dpp_check, estimate_cost, extract_policy, residuals, solve, validate_hypotheses, Controller,
    ImpulseSchedule, PolicyTable, ResidualReport, SchemeConfig, SimResult, ValidationReport,
    ValueField,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const FIELD_DIR: &str = "field";
pub const VALIDATION_FILE: &str = "validation.json";
pub const RESIDUALS_FILE: &str = "residuals.json";
pub const POLICY_FILE: &str = "policy.csv";
pub const SIM_FILE: &str = "sim.json";
pub const PATHS_FILE: &str = "paths.csv";
pub const DPP_FILE: &str = "dpp.json";
pub const LIMIT_FILE: &str = "limit.csv";
pub const SMOOTH_FILE: &str = "smooth.json";
pub const MODULI_FILE: &str = "moduli.json";

/// A loaded configuration plus the resolved output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides<'a> {
    pub out: Option<&'a Path>,
    pub seed: Option<u64>,
    pub strict: bool,
    pub paths: Option<usize>,
}

impl Run {
    pub fn new(mut cfg: RunConfig, ov: Overrides<'_>) -> CliResult<Self> {
        if let Some(seed) = ov.seed {
            cfg.mc.seed = seed;
        }
        if let Some(n) = ov.paths {
            cfg.mc.n_paths = n;
        }
        if ov.strict {
            cfg.mode = Mode::Strict;
        }
        let out = ov
            .out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| cfg.output_dir.clone());
        fs::create_dir_all(&out).map_err(lagqvi::Error::from)?;
        Ok(Self { cfg, out })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        fs::write(self.path(name), contents).map_err(lagqvi::Error::from)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, &to_json(value))
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> CliResult<T> {
        let path = self.path(name);
        let text = fs::read_to_string(&path).map_err(|_| lagqvi::Error::MissingArtifact(path))?;
        Ok(serde_json::from_str(&text).map_err(lagqvi::Error::from)?)
    }

    /// Reads the persisted field and checks it belongs to this problem.
    pub fn field(&self) -> CliResult<ValueField> {
        let dir = self.path(FIELD_DIR);
        let field = load_field(&dir)?;
        let expected = self.cfg.problem.hash();
        if field.meta.spec_hash != expected {
            return Err(CliError::StaleField {
                dir,
                found: field.meta.spec_hash,
                expected,
            });
        }
        Ok(field)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes") + "\n"
}

pub fn validate(run: &Run) -> CliResult<ValidationReport> {
    let v = run.cfg.validation;
    let report = validate_hypotheses(&run.cfg.problem, v.n_samples, v.seed)?;
    run.write_json(VALIDATION_FILE, &report)?;
    match report.first_failure() {
        Some(c) => Err(CliError::Hypothesis {
            clause: c.clause.clone(),
            worst: c.worst,
            limit: c.limit,
        }),
        None => Ok(report),
    }
}

pub fn solve_field(run: &Run) -> CliResult<ResidualReport> {
    let spec = &run.cfg.problem;
    let grid = build_grid_from(spec, &run.cfg.grid)?;
    let field = solve(spec, &grid, &SchemeConfig::for_spec(spec))?;
    let report = residuals(&field, spec)?;
    save_field(&field, &run.path(FIELD_DIR))?;
    run.write_json(RESIDUALS_FILE, &report)?;
    log::info!(
        "solved {} x {} x {} nodes, residual {:e}",
        grid.n_t + 1,
        grid.m + 1,
        grid.n_x + 1,
        report.pde_residual_sup
    );
    Ok(report)
}

fn policy_for(run: &Run, field: &ValueField) -> CliResult<PolicyTable> {
    let report = residuals(field, &run.cfg.problem)?;
    Ok(extract_policy(
        field,
        &run.cfg.problem,
        default_tol(report.pde_residual_sup),
    )?)
}

pub fn policy(run: &Run) -> CliResult<PolicyTable> {
    let field = run.field()?;
    let table = policy_for(run, &field)?;
    run.write(POLICY_FILE, &table.to_csv())?;
    Ok(table)
}

/// Which controller `simulate` drives the state with.
#[derive(Debug, Clone)]
pub enum ControllerChoice {
    Trivial,
    Schedule(PathBuf),
    Policy,
}

pub fn simulate(run: &Run, choice: &ControllerChoice, init: InitialState) -> CliResult<SimResult> {
    let spec = &run.cfg.problem;
    let result = match choice {
        ControllerChoice::Trivial => {
            estimate_cost(spec, init, Controller::Trivial, &run.cfg.mc, run.cfg.mode)?
        }
        ControllerChoice::Schedule(path) => {
            let schedule = ImpulseSchedule::load(path)?;
            estimate_cost(
                spec,
                init,
                Controller::Schedule(&schedule),
                &run.cfg.mc,
                run.cfg.mode,
            )?
        }
        ControllerChoice::Policy => {
            let field = run.field()?;
            let table = policy_for(run, &field)?;
            estimate_cost(
                spec,
                init,
                Controller::Policy(&table),
                &run.cfg.mc,
                run.cfg.mode,
            )?
        }
    };
    run.write(SIM_FILE, &result.to_json())?;
    run.write(PATHS_FILE, &result.paths_csv())?;
    Ok(result)
}

pub fn dpp(run: &Run, init: InitialState, s: f64) -> CliResult<DppReport> {
    let field = run.field()?;
    let report = dpp_check(&field, &run.cfg.problem, init, s, &run.cfg.mc)?;
    run.write_json(DPP_FILE, &report)?;
    Ok(report)
}

pub fn limit(run: &Run, deltas: &[f64]) -> CliResult<LimitStudy> {
    let spec = &run.cfg.problem;
    let grid = build_grid_from(spec, &run.cfg.grid)?;
    let study = lag_limit_study(spec, &grid, deltas)?;
    run.write(LIMIT_FILE, &study.to_csv())?;
    Ok(study)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingEntry {
    pub gamma: f64,
    /// `sup (v^gamma - v)`.
    pub upper_gap: f64,
    /// `sup (v - v_gamma)`.
    pub lower_gap: f64,
    /// `v_gamma <= v <= v^gamma` at every node.
    pub sandwiched: bool,
    /// Smallest second difference of `v^gamma` in units of `step^2 / gamma^2`.
    pub min_scaled_second_difference: f64,
}

pub fn smooth(run: &Run, gammas: &[f64]) -> CliResult<Vec<SmoothingEntry>> {
    let field = run.field()?;
    let mut entries = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let up = sup_convolution(&field, gamma)?;
        let down = inf_convolution(&field, gamma)?;
        let sandwiched = down
            .values()
            .zip(field.values())
            .zip(up.values())
            .all(|((l, v), u)| l <= v && v <= u);
        entries.push(SmoothingEntry {
            gamma,
            upper_gap: sup_distance(&up, &field),
            lower_gap: sup_distance(&down, &field),
            sandwiched,
            min_scaled_second_difference: min_scaled_second_difference(&up, gamma),
        });
    }
    run.write_json(SMOOTH_FILE, &entries)?;
    Ok(entries)
}

pub fn moduli(run: &Run) -> CliResult<ModuliReport> {
    let report = continuity_moduli(&run.field()?);
    run.write_json(MODULI_FILE, &report)?;
    Ok(report)
}
