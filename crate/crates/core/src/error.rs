use thiserror::Error;

/// Errors raised anywhere in the discretization and solve pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("singular moment matrix at x = {x:e} (condition estimate {condition:e}); influence factor too small or too few covering clouds")]
    SingularMoment { x: f64, condition: f64 },

    #[error("degenerate stability parameter in row {row}: sum of eta*theta vanishes")]
    DegenerateTau { row: usize },

    #[error("point x = {x:e} outside the domain [{start:e}, {end:e}]")]
    OutOfDomain { x: f64, start: f64, end: f64 },

    #[error("potential undefined at x = {x:e} for a point nucleus")]
    PotentialDomain { x: f64 },

    #[error("supercritical coupling: Z^2 alpha^2 = {z2a2} >= kappa^2 = {kappa2}")]
    Supercritical { z2a2: f64, kappa2: f64 },

    #[error("pole in second-order coefficients at x = {x:e}: lambda equals w{branch}(x)")]
    CoefficientPole { x: f64, branch: char },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("singular matrix B in generalized eigenproblem")]
    SingularB,

    #[error("no real eigenvalues inside the spectral gap")]
    EmptySpectrum,
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical method itself rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMoment { .. }
                | Error::DegenerateTau { .. }
                | Error::NoConvergence
                | Error::SingularB
                | Error::EmptySpectrum
                | Error::CoefficientPole { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
