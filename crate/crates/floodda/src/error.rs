use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("solver error at t={time:.1} s: {message}")]
    Solver { time: f64, message: String },

    #[error("CFL violation at t={time:.1} s: dt={dt:.3} s exceeds {limit:.3} s at cell {cell}")]
    CflViolation {
        time: f64,
        dt: f64,
        limit: f64,
        cell: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("experiment '{experiment}' failed: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: Box<Error>,
    },

    #[error("ensemble member {member} failed at t={time:.1} s: {message}")]
    Member {
        member: usize,
        time: f64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("TOML parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("TOML serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
