use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Frequency at or beyond a band edge of the named waveguide.
    #[error("frequency {frequency} is outside the band [{lower}, {upper}] of waveguide `{waveguide}`")]
    OutOfBand {
        waveguide: String,
        frequency: f64,
        lower: f64,
        upper: f64,
    },

    #[error("mixing angle undefined: J = 0 and degenerate atom frequencies")]
    Degenerate,

    #[error("SSH chain is not topological (J1 = {j1} >= J2 = {j2})")]
    NotTopological { j1: f64, j2: f64 },

    #[error("modes are not resonant: {freq_a} vs {freq_b}")]
    NotResonant { freq_a: f64, freq_b: f64 },

    /// Norm of a Hermitian configuration drifted past the tolerance; dt is too large.
    #[error("norm drifted to {norm} at t = {time}; reduce dt")]
    NormDrift { time: f64, norm: f64 },

    /// Schema or consistency violation, with the path of the offending item.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Physically inconsistent configuration, with a suggested remedy.
    #[error("physics violation at `{path}`: {message} (suggested fix: {fix})")]
    Physics {
        path: String,
        message: String,
        fix: String,
    },

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("malformed state dump: {0}")]
    StateDump(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Qualify the path of a config or physics error with a parent path.
    pub fn under(self, head: &str) -> Self {
        match self {
            Error::Config { path, message } if !path.starts_with("scenario") => Error::Config {
                path: format!("{head}.{path}"),
                message,
            },
            Error::Physics { path, message, fix } if !path.starts_with("scenario") => Error::Physics {
                path: format!("{head}.{path}"),
                message,
                fix,
            },
            other => other,
        }
    }
}
