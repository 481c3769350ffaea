//! Command-line front end for `lagqvi`: configuration loading, one
//! subcommand per pipeline stage, and a combined verification report.
//!
//! Exit codes: 0 success, 2 hypothesis failure, 3 configuration or parse
//! error, 4 missing artifact, 5 inadmissible impulse control, 1 otherwise.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lagqvi::simulate::InitialState;

pub use commands::{ControllerChoice, Overrides, Run};
pub use config::{RunConfig, ValidationOptions};
pub use error::{CliError, CliResult};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "LAGQVI_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "lagqvi",
    version,
    about = "Impulse control with a decision lag"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed for Monte Carlo streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Abort on inadmissible impulses instead of dropping them.
    #[arg(long)]
    strict: bool,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Debug, Args)]
struct StartArgs {
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// Elapsed time since the last impulse; defaults to the lag.
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x0: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing hypotheses on samples.
    Validate(Common),
    /// Solve the value function and write the field and residuals.
    Solve(Common),
    /// Extract the impulse policy from a solved field.
    Policy(Common),
    /// Estimate the cost of a controller by Monte Carlo.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartArgs,
        /// Open-loop schedule CSV (`tau,xi`).
        #[arg(long, conflicts_with = "trivial")]
        schedule: Option<PathBuf>,
        /// Never intervene.
        #[arg(long)]
        trivial: bool,
    },
    /// Compare the field with the dynamic programming relation.
    Dpp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: StartArgs,
        /// Intermediate time.
        #[arg(long)]
        s: f64,
    },
    /// Distance to the no-lag problem for a decreasing list of lags.
    Limit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
    },
    /// Sup- and inf-convolutions of the solved field.
    Smooth {
        #[command(flatten)]
        common: Common,
        #[arg(
            long = "gamma-list",
            value_delimiter = ',',
            default_value = "0.2,0.1,0.05"
        )]
        gamma_list: Vec<f64>,
    },
    /// Full pipeline with a pass/fail verdict.
    Report(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Validate(c) | Command::Solve(c) | Command::Policy(c) | Command::Report(c) => c,
            Command::Simulate { common, .. }
            | Command::Dpp { common, .. }
            | Command::Limit { common, .. }
            | Command::Smooth { common, .. } => common,
        }
    }
}

fn open_run(c: &Common) -> CliResult<Run> {
    let cfg = RunConfig::load(&c.config)?;
    Run::new(
        cfg,
        Overrides {
            out: c.out.as_deref(),
            seed: c.seed,
            strict: c.strict,
            paths: c.paths,
        },
    )
}

fn start_state(run: &Run, s: &StartArgs) -> InitialState {
    InitialState::new(s.t0, s.r0.unwrap_or(run.cfg.problem.delta), s.x0)
}

fn dispatch(command: &Command) -> CliResult<String> {
    let run = open_run(command.common())?;
    let summary = match command {
        Command::Validate(_) => {
            commands::validate(&run)?;
            "all hypothesis clauses hold".to_string()
        }
        Command::Solve(_) => {
            let r = commands::solve_field(&run)?;
            commands::to_json(&r)
        }
        Command::Policy(_) => {
            let p = commands::policy(&run)?;
            let active = p.act.iter().filter(|&&a| a).count();
            format!("policy written, {active} active nodes")
        }
        Command::Simulate {
            start,
            schedule,
            trivial,
            ..
        } => {
            let choice = match (schedule, trivial) {
                (Some(path), _) => ControllerChoice::Schedule(path.clone()),
                (None, true) => ControllerChoice::Trivial,
                (None, false) => ControllerChoice::Policy,
            };
            commands::simulate(&run, &choice, start_state(&run, start))?.to_json()
        }
        Command::Dpp { start, s, .. } => {
            commands::to_json(&commands::dpp(&run, start_state(&run, start), *s)?)
        }
        Command::Limit { deltas, .. } => commands::limit(&run, deltas)?.to_csv(),
        Command::Smooth { gamma_list, .. } => {
            commands::to_json(&commands::smooth(&run, gamma_list)?)
        }
        Command::Report(_) => commands::to_json(&report::report(&run)?),
    };
    Ok(summary)
}

/// Caps the global worker pool from the environment, once per process.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
