use core::fmt;

use num_complex::Complex64;

/// Errors raised by the numerical core.
///
/// Variants that can occur during a frequency sweep carry the angular
/// frequency (rad/s) at which they happened once the sweep has tagged them
/// with [`Error::at`].
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A transfer element was evaluated at (or numerically on top of) a pole.
    PoleHit { s: Complex64, omega: Option<f64> },
    /// A quaternion with vanishing semi-norm was inverted.
    SingularQuaternion { omega: Option<f64> },
    /// A 2x2 matrix with vanishing determinant was inverted.
    Singular,
    /// A range, count or parameter violated its precondition.
    InvalidRange(&'static str),
    /// The denominator polynomial of a rational element is identically zero.
    ZeroDenominator,
    /// The phase of the characteristic equation moved by more than 90 degrees
    /// between two consecutive samples away from any pole crossing.
    UnderResolved { omega: f64, step_deg: f64 },
    /// The steady-state circuit has no solution at the fundamental frequency.
    Unsolvable,
    /// State-space blocks with inconsistent dimensions.
    Assembly(&'static str),
    /// The eigensolver failed to converge.
    EigenSolver,
}

impl Error {
    /// Attaches a sweep frequency to errors that do not carry one yet.
    pub fn at(self, omega: f64) -> Self {
        match self {
            Error::PoleHit { s, omega: None } => Error::PoleHit { s, omega: Some(omega) },
            Error::SingularQuaternion { omega: None } => Error::SingularQuaternion { omega: Some(omega) },
            other => other,
        }
    }
}

fn write_omega(f: &mut fmt::Formatter<'_>, omega: Option<f64>) -> fmt::Result {
    match omega {
        Some(w) => write!(f, " at {:.4} Hz", w / (2.0 * core::f64::consts::PI)),
        None => Ok(()),
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::PoleHit { s, omega } => {
                write!(f, "evaluation at a pole (s = {} {:+}j)", s.re, s.im)?;
                write_omega(f, *omega)
            }
            Error::SingularQuaternion { omega } => {
                write!(f, "singular quaternion (semi-norm vanishes)")?;
                write_omega(f, *omega)
            }
            Error::Singular => write!(f, "singular 2x2 matrix"),
            Error::InvalidRange(what) => write!(f, "invalid range: {what}"),
            Error::ZeroDenominator => write!(f, "denominator polynomial is identically zero"),
            Error::UnderResolved { omega, step_deg } => write!(
                f,
                "frequency grid too coarse: phase step of {step_deg:.1} deg near {:.4} Hz",
                omega / (2.0 * core::f64::consts::PI)
            ),
            Error::Unsolvable => write!(f, "operating point has no solution at the fundamental frequency"),
            Error::Assembly(what) => write!(f, "state-space assembly error: {what}"),
            Error::EigenSolver => write!(f, "eigenvalue solver did not converge"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
