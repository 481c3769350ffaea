use std::fs;
use std::path::{Path, PathBuf};

use lagqvi::grid::GridSpec;
use lagqvi::simulate::Mode;
use lagqvi::{McConfig, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn default_samples() -> usize {
    2000
}

/// Sampling effort for the hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationOptions {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            n_samples: default_samples(),
            seed: 0,
        }
    }
}

/// Everything one run needs: the problem, its discretization, the Monte
/// Carlo settings and where artifacts go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub grid: GridSpec,
    pub mc: McConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub validation: ValidationOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(lagqvi::Error::from)?;
        cfg.problem.check_structure()?;
        let grid_dt = cfg.problem.horizon / cfg.grid.n_t.max(1) as f64;
        if cfg.mc.dt_sim > grid_dt * (1.0 + 1e-12) {
            return Err(lagqvi::Error::Config {
                field: "mc.dt_sim".into(),
                reason: format!(
                    "simulation step {} exceeds the grid step {grid_dt}",
                    cfg.mc.dt_sim
                ),
            }
            .into());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes") + "\n"
    }
}
