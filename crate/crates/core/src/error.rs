use thiserror::Error;

/// Errors raised by model evaluation, network construction, and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0} is not supported by this model")]
    Unsupported(&'static str),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid gains: {0}")]
    Gains(String),

    #[error("matrix must be symmetric (asymmetry {0:.3e}); symmetrize before decomposing")]
    NotSymmetric(f64),

    #[error("invalid controller setup: {0}")]
    Controller(String),

    #[error("delay buffer query at t = {query} is ahead of the newest sample at t = {newest}")]
    NonCausal { query: f64, newest: f64 },

    #[error("simulation diverged at t = {time}: {detail}")]
    BlowUp { time: f64, detail: String },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
