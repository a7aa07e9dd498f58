use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action {action} is not a member of the discrete action set {allowed:?}")]
    InvalidAction { action: f64, allowed: Vec<f64> },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dynamics model has not been trained")]
    Untrained,

    #[error("cannot train on an empty trace")]
    EmptyTrace,

    #[error("training diverged at pass {pass} (output dim {dim}): loss = {loss}")]
    Diverged { pass: usize, dim: usize, loss: f64 },

    #[error("empty series: {0}")]
    EmptySeries(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("missing file {0}")]
    Missing(PathBuf),

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
