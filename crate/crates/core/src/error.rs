use thiserror::Error;

#[derive(Debug, Error)]
pub enum SikError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("position {0:?} lies outside the source domain")]
    OutsideDomain(Vec<f64>),
    #[error("unsupported derivative order {0} (supported: 0..=3)")]
    UnsupportedOrder(usize),
    #[error("sign mismatch: {0}")]
    SignMismatch(String),
    #[error("zero weight encountered")]
    ZeroWeight,
    #[error("Fisher information is singular (condition number {0:.3e})")]
    SingularFisher(f64),
    #[error("{what} did not converge (residual {residual:.3e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SikError {
    /// Errors caused by malformed user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            SikError::Config(_) | SikError::Json(_) | SikError::InvalidInput(_) | SikError::Dimension(_) | SikError::OutsideDomain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SikError>;
