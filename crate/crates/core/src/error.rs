use std::path::PathBuf;

/// Errors raised across the simulation library.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// Vector or matrix shapes do not agree.
    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A structural precondition on a topology or game was violated.
    #[error("invalid structure: {0}")]
    Structure(String),

    /// A quantizer input fell outside the representable range `|x| < 2^b * theta`.
    #[error("coordinate {index} = {value} is not representable (|x| must be < {limit})")]
    Range { index: usize, value: f64, limit: f64 },

    /// An iteration produced a NaN or infinite value, or a scaled quantizer input overflowed.
    #[error("numeric fault at iteration {iteration}: {reason}")]
    NumericFault { iteration: usize, reason: String },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A configuration field holds an unusable value.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A trial inside an experiment failed.
    #[error("variant `{variant}` trial {trial}: {source}")]
    Trial {
        variant: String,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
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
