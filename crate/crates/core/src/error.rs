use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two states or arrays that must share a grid do not.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A superposition cancelled to zero norm.
    #[error("degenerate superposition: resulting norm is zero")]
    Degenerate,
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    /// Time step violates one of the propagator stability guards.
    #[error("step size violates the {guard} guard: {detail}")]
    StepSize { guard: &'static str, detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Localization centre landed where the state has no amplitude.
    #[error("zero support: hit at a = {center} has weight {weight:e}")]
    ZeroSupport { center: f64, weight: f64 },
    #[error("no outcome decided within the time budget of {budget} (internal time)")]
    Timeout { budget: f64 },
    #[error("insufficient statistics: {0}")]
    Statistics(String),
    #[error("configuration error: {0}")]
    Config(String),
}

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}
pub(crate) use domain;
