//! Error type shared by every module in the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, AbError>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum AbError {
    /// A precondition on user-supplied data was violated.
    InvalidInput(String),
    /// Adaptive quadrature hit its subdivision limit; carries the best
    /// estimate obtained and the error estimate actually achieved.
    QuadratureTolerance {
        best: f64,
        error_estimate: f64,
        requested: f64,
    },
    /// The adaptive ODE step size underflowed (e.g. near a potential
    /// singularity); carries the time that was reached.
    StepUnderflow { time_reached: f64 },
    /// A packet validity condition failed.
    Regime {
        wavelength_ratio: f64,
        spreading_ratio: f64,
        failed: &'static str,
    },
    /// Two interacting particles coincided at the given time.
    Singularity { time: f64 },
    /// Wavefunction amplitude reached the grid boundary.
    BoundaryLeak { magnitude: f64 },
    /// Overlap magnitude too small to define a relative phase.
    DegenerateOverlap { magnitude: f64 },
    /// A geometry or budget constraint cannot be satisfied.
    Configuration(String),
    /// The requested packet combination is not supported.
    Unsupported(String),
}

impl fmt::Display for AbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            AbError::QuadratureTolerance {
                best,
                error_estimate,
                requested,
            } => write!(
                f,
                "quadrature did not converge: best {best:e}, error estimate {error_estimate:e}, requested {requested:e}"
            ),
            AbError::StepUnderflow { time_reached } => {
                write!(f, "ODE step size underflow at t = {time_reached:e}")
            }
            AbError::Regime {
                wavelength_ratio,
                spreading_ratio,
                failed,
            } => write!(
                f,
                "packet regime check failed ({failed}): wavelength ratio {wavelength_ratio:e}, spreading ratio {spreading_ratio:e}"
            ),
            AbError::Singularity { time } => {
                write!(f, "coincident particle positions at t = {time:e}")
            }
            AbError::BoundaryLeak { magnitude } => {
                write!(f, "wavefunction reached grid boundary (leak {magnitude:e})")
            }
            AbError::DegenerateOverlap { magnitude } => {
                write!(f, "overlap magnitude {magnitude:e} too small to carry a phase")
            }
            AbError::Configuration(msg) => write!(f, "unsatisfiable configuration: {msg}"),
            AbError::Unsupported(msg) => write!(f, "unsupported configuration: {msg}"),
        }
    }
}

impl core::error::Error for AbError {}

pub(crate) fn invalid(msg: impl Into<String>) -> AbError {
    AbError::InvalidInput(msg.into())
}
