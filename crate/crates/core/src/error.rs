use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A matrix that must be inverted (or factored) is numerically singular.
    #[error("{what} is singular or not positive definite")]
    Singular { what: String },

    #[error("ADMM produced a non-finite iterate at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("ADMM invariant violated at iteration {iteration}: {detail}")]
    InvariantViolation { iteration: usize, detail: String },

    #[error("setup {setup}: {source}")]
    Setup {
        setup: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("campaign aborted: {failed} of {total} setups failed after resampling")]
    CampaignAborted { failed: u64, total: u64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn singular(what: impl Into<String>) -> Self {
        Error::Singular { what: what.into() }
    }

    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures caused by an unlucky channel draw, which the campaign
    /// engine recovers from by resampling the setup.
    pub fn is_singular(&self) -> bool {
        match self {
            Error::Singular { .. } => true,
            Error::Setup { source, .. } => source.is_singular(),
            _ => false,
        }
    }
}
