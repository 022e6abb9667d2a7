use thiserror::Error;

/// Errors raised by model construction, simulation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A per-asset precondition does not hold.
    #[error("asset {asset}: {reason}")]
    AssetPrecondition { asset: usize, reason: String },

    /// Two objects that must agree in size do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Exhaustive enumeration would visit more states than allowed.
    #[error("enumeration budget exceeded: {needed} states > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    /// An estimator stopped before reaching its target precision.
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
