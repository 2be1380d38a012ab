use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix contained NaN or an infinite entry.
    InvalidMatrix(&'static str),
    InvalidDimensions(String),
    NotSymmetric(&'static str),
    InvalidTolerance(&'static str),
    InvalidArgument(String),
    NumericalFailure(&'static str),
    NotStabilizing,
    NotStabilizable,
    SingularA,
    Diverged { iterations: usize },
    NotConverged { iterations: usize, last_change: f64 },
    NotStrictlyDissipative,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMatrix(what) => write!(f, "{what} has a non-finite entry"),
            Error::InvalidDimensions(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::NotSymmetric(what) => write!(f, "{what} is not symmetric"),
            Error::InvalidTolerance(what) => write!(f, "invalid tolerance setting: {what}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::NotStabilizing => write!(f, "feedback does not stabilize the system"),
            Error::NotStabilizable => write!(f, "system is not stabilizable"),
            Error::SingularA => write!(f, "state matrix A is singular"),
            Error::Diverged { iterations } => {
                write!(f, "Riccati iteration diverged after {iterations} iterations")
            }
            Error::NotConverged { iterations, last_change } => write!(
                f,
                "Riccati iteration did not converge in {iterations} iterations (last change {last_change:e})"
            ),
            Error::NotStrictlyDissipative => {
                write!(f, "problem is not strictly pre-dissipative")
            }
        }
    }
}
