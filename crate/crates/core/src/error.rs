use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An exhaustive enumeration would exceed the configured size limit.
    #[error("enumeration guard exceeded: {what} has {size} elements (limit {limit})")]
    GuardExceeded { what: &'static str, size: String, limit: u64 },

    /// A condition required by the worst-case construction does not hold.
    #[error("assumption not satisfied: {0}")]
    AssumptionFailed(String),

    /// An internal consistency check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
