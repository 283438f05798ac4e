use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building networks, validating configurations, or
/// writing experiment outputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot produce connected graph with {nodes} nodes and radius {radius} after {attempts} draws")]
    Disconnected {
        nodes: usize,
        radius: f64,
        attempts: usize,
    },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid edge list at line {line}: {reason}")]
    EdgeList { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid analysis parameters: {0}")]
    Analysis(String),

    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("unknown preset `{0}` (expected fig_msd_cost, fig_beta_sweep or fig_censoring)")]
    UnknownPreset(String),

    #[error("output error at {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by user input rather than the runtime environment.
    pub fn is_config_error(&self) -> bool {
        !matches!(self, Error::Output { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
