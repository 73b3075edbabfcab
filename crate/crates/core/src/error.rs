use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value showed up in the simulated state.
    #[error("integrity error at t={t}: {detail}")]
    Integrity { t: f64, detail: String },

    #[error("time regression: {to} is earlier than {from}")]
    TimeRegression { from: f64, to: f64 },

    #[error("no pursuer/evader pair ({pursuer}, {evader}) in trace")]
    UnknownPair { pursuer: usize, evader: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Config errors map to CLI exit code 1; everything else that happens
    /// while running is a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Json { .. } | Error::Io { .. } | Error::Domain(_)
        )
    }
}
