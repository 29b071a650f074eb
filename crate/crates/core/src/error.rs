use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    SvdNoConvergence { sweeps: usize, residual: f64 },

    #[error("training diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("monte-carlo gradient too noisy: stderr {stderr:e} exceeds 10% of gradient norm {norm:e}; increase mc_n")]
    McAccuracy { stderr: f64, norm: f64 },

    #[error("link `{0}` has no weak gradient")]
    NoLinkGradient(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
