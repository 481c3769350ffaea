use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lagqvi::Error),

    #[error("hypothesis check failed: clause `{clause}` (worst {worst}, limit {limit})")]
    Hypothesis {
        clause: String,
        worst: f64,
        limit: f64,
    },

    #[error("cannot read config {}: {source}", path.display())]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("field in {} belongs to another problem (hash {found}, expected {expected})", dir.display())]
    StaleField {
        dir: PathBuf,
        found: String,
        expected: String,
    },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    Verdict(String),
}

impl CliError {
    /// 0 ok, 2 hypothesis, 3 config or parse, 4 missing artifact,
    /// 5 admissibility, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use lagqvi::Error as E;
        match self {
            CliError::Hypothesis { .. } => 2,
            CliError::ConfigRead { .. } | CliError::StaleField { .. } | CliError::Usage(_) => 3,
            CliError::Core(e) => match e {
                E::Config { .. } | E::Parse(_) | E::LagNotCommensurate { .. } | E::Cfl { .. } => 3,
                E::MissingArtifact(_) => 4,
                E::Admissibility(_) => 5,
                _ => 1,
            },
            CliError::Verdict(_) => 1,
        }
    }
}
