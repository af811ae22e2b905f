use num_rational::BigRational;
use thiserror::Error;

use crate::cover::CoverResult;
use crate::sigma::SigmaTest;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Conditioning removed every support element. The cover loop treats this
    /// as successful termination.
    #[error("conditioning left an empty support")]
    EmptyConditioning,

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("budget exhausted: {0}")]
    Budget(Box<BudgetExhausted>),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A covering round ran out of sampling attempts.
#[derive(Debug)]
pub struct BudgetExhausted {
    pub round: u64,
    pub attempts: u64,
    /// Best σ-valid candidate seen and the residual mass it covered.
    pub best: Option<(SigmaTest, BigRational)>,
    /// Rounds completed before the failing round, when raised from `run_cover`.
    pub partial: Option<CoverResult>,
}

impl std::fmt::Display for BudgetExhausted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "round {} exhausted its budget of {} attempts",
            self.round, self.attempts
        )?;
        if let Some((_, cov)) = &self.best {
            write!(f, " (best coverage {cov})")?;
        }
        Ok(())
    }
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
