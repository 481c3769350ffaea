use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or malformed.
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(
        "lag not commensurate: delta * n_t / T = {ratio} is not an integer \
         (nearest admissible n_t: {below}, {above})"
    )]
    LagNotCommensurate {
        ratio: f64,
        below: usize,
        above: usize,
    },

    #[error("CFL condition violated: dt = {dt} exceeds the maximum stable dt = {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    /// An impulse control broke the lag or cone constraints.
    #[error("inadmissible impulse control: {0}")]
    Admissibility(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fixed point did not converge after {iterations} iterations (trace of sup-changes: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
