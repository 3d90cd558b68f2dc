use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants split into two families: input problems (dimension, validation,
/// non-correctable codes) and numerical problems detected after the fact
/// (instability, failed cross-checks, failed fits).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate code: {0}")]
    DegenerateCode(String),

    #[error("code is not correctable: {0}")]
    NotCorrectable(String),

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("fit error: {0}")]
    Fit(String),
}

impl Error {
    /// True for errors detected by a numerical self-check rather than by
    /// input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalInstability(_) | Error::Consistency(_) | Error::Fit(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Validation(_) => "validation",
            Error::DegenerateCode(_) => "degenerate-code",
            Error::NotCorrectable(_) => "not-correctable",
            Error::NumericalInstability(_) => "numerical-instability",
            Error::Consistency(_) => "consistency",
            Error::Fit(_) => "fit",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
