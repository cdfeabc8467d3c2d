use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration did not converge: {message} (value {value:e}, error estimate {error:e}, {subdivisions} subdivisions)")]
    NonConvergence {
        message: String,
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("system is unstable: {reason}{}", bracket_suffix(.threshold_bracket))]
    Unstable {
        reason: String,
        threshold_bracket: Option<(f64, f64)>,
    },

    #[error("finite-difference step {step:e} is noise dominated; try h = {recommended:e}")]
    StepTooSmall { step: f64, recommended: f64 },

    #[error("scenario has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    Scenario(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn bracket_suffix(b: &Option<(f64, f64)>) -> String {
    match b {
        Some((lo, hi)) => format!(" (threshold in [{lo:e}, {hi:e}])"),
        None => String::new(),
    }
}
