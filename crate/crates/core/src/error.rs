use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum ApdError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no closed-form reference: {0}")]
    NoReference(String),
    #[error("operator norm estimate did not converge after {iterations} iterations (last estimate {estimate})")]
    NormEstimate { estimate: f64, iterations: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("line search failed after {halvings} halvings")]
    LineSearch { halvings: usize },
    #[error("saddle reference is inconsistent: Lagrangian gap {gap:e} is negative")]
    InvalidReference { gap: f64 },
    #[error("integration diverged at t = {t}")]
    Divergence {
        t: f64,
        last: Box<crate::flow::FlowState>,
    },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ApdError>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(ApdError::Dimension {
            what,
            expected,
            found,
        })
    }
}
