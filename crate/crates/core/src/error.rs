use thiserror::Error;

/// Everything that can go wrong while validating inputs or pricing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("funding policy is not linearizing (expected alpha_s = -kappa = {expected_alpha_s}, alpha1 + alpha2 = 1)")]
    NonLinearizingPolicy { expected_alpha_s: f64 },

    #[error("strike {strike} is not the ATMRF strike {k_star} (relative gap {gap:.3e})")]
    NotAtmrf { strike: f64, k_star: f64, gap: f64 },

    #[error("quadrature stalled at error estimate {estimate:.3e} > tolerance {tol:.3e} after {evals} evaluations")]
    QuadratureNonConvergence { tol: f64, estimate: f64, evals: usize },

    #[error("PDE grid too coarse: Richardson error estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    GridTooCoarse { estimate: f64, tol: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_owned(), reason: reason.into() }
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NonLinearizingPolicy { .. }
                | Error::NotAtmrf { .. }
                | Error::InvalidGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
