use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
#[derive(Debug)]
pub enum Error {
    /// A parameter or argument is outside its physical domain.
    InvalidParam(String),
    /// A requested ratio is undefined because the transition is decoupled
    /// (its interference factor vanishes).
    Decoupled(String),
    /// The trace-constrained stationary system is singular: the model has no
    /// unique steady state (e.g. all rates and drives zero).
    DegenerateSteadyState,
    /// Least-squares iteration exhausted its budget without meeting the
    /// convergence tests; carries the best-so-far report for diagnostics.
    FitDidNotConverge(Box<crate::fit::FitReport>),
    /// Residuals are identically zero; the information criterion is undefined.
    PerfectFit,
    /// A doublet fit where the splitting cannot be resolved against the
    /// linewidth.
    UnresolvedDoublet { splitting: f64, linewidth: f64 },
    /// The data carry no usable information for the requested parameters.
    IllConditionedFit(String),
    /// A linear solve failed on a singular matrix.
    Singular(String),
    /// Malformed text input, with the offending 1-based line number.
    Parse { line: usize, msg: String },
    /// A required key is missing from a configuration file.
    MissingKey(String),
    Io(std::io::Error),
}

impl Error {
    pub fn invalid_param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    /// Process exit code for CLI use: 1 for malformed input/usage problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_)
            | Error::Parse { .. }
            | Error::MissingKey(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Decoupled(msg) => write!(f, "decoupled transition: {msg}"),
            Error::DegenerateSteadyState => {
                write!(f, "no unique steady state: constrained system is singular")
            }
            Error::FitDidNotConverge(report) => write!(
                f,
                "fit did not converge after {} iterations (sse {:.6e})",
                report.iterations, report.sse
            ),
            Error::PerfectFit => write!(f, "zero residuals: information criterion undefined"),
            Error::UnresolvedDoublet {
                splitting,
                linewidth,
            } => write!(
                f,
                "unresolved doublet: splitting {splitting:.6e} below linewidth {linewidth:.6e}"
            ),
            Error::IllConditionedFit(msg) => write!(f, "ill-conditioned fit: {msg}"),
            Error::Singular(msg) => write!(f, "singular linear system: {msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::MissingKey(key) => write!(f, "missing configuration key: {key}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            msg: err.to_string(),
        }
    }
}
