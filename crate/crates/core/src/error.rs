use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument fell outside the interval where it is defined.
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("observation {x} is outside the support of {family} ({support})")]
    Support {
        x: f64,
        family: String,
        support: &'static str,
    },

    #[error("posterior improper: {family} needs n >= {threshold}, have n = {n}")]
    ImproperPosterior {
        family: String,
        threshold: u64,
        n: u64,
    },

    /// Internal state became unusable (non-finite log density, degenerate statistics, ...).
    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub(crate) fn domain(what: &'static str, value: f64, domain: impl ToString) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.to_string(),
        }
    }
}
