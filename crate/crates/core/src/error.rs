use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("gamma function pole at {0}")]
    GammaPole(Complex64),

    #[error("Mittag-Leffler evaluation failed in {regime} regime after {terms} terms (last change {change:.3e})")]
    MittagLeffler {
        regime: &'static str,
        terms: usize,
        change: f64,
    },

    #[error("no Esscher root: {0}")]
    NoRoot(String),

    #[error("covariance factorization failed after {attempts} jitter attempts")]
    Cholesky { attempts: usize },

    #[error("transform inversion failed: {0}")]
    Inversion(String),

    #[error("linear solver did not converge at step {step}; residual history {history:?}")]
    Solver { step: usize, history: Vec<f64> },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
