use thiserror::Error;

use crate::grid::Space;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is tagged {found:?}, expected {expected:?}")]
    SpaceTag { expected: Space, found: Space },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("resolvent symbol is singular: real energy {lambda} lies inside the lattice spectrum")]
    SingularSymbol { lambda: f64 },

    #[error("shell radius {radius} is outside the Nyquist limit {xi_max}")]
    ShellOutsideNyquist { radius: f64, xi_max: f64 },

    #[error("torus wrap guard: horizon {t} exceeds the admissible {t_max} (packet width {width}, speed {speed})")]
    TorusWrap { t: f64, t_max: f64, width: f64, speed: f64 },

    #[error("step-size guard: {0}")]
    StepSize(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { solver: &'static str, iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Guard violations abort a run with a distinct status.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            Error::TorusWrap { .. }
                | Error::ShellOutsideNyquist { .. }
                | Error::StepSize(_)
                | Error::SingularSymbol { .. }
        )
    }

    pub fn guard_name(&self) -> Option<&'static str> {
        match self {
            Error::TorusWrap { .. } => Some("torus_wrap"),
            Error::ShellOutsideNyquist { .. } => Some("shell_nyquist"),
            Error::StepSize(_) => Some("step_size"),
            Error::SingularSymbol { .. } => Some("singular_symbol"),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
