use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// Every variant carries enough context (ids, names, values) to be reported
/// without the caller having to re-derive it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown user {0}")]
    UnknownUser(u32),
    #[error("unknown item {0}")]
    UnknownItem(u32),
    #[error("unknown category {0}")]
    UnknownCategory(u32),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("attribute `{attribute}` class `{class}` has an empty complement group")]
    EmptyComplement { attribute: String, class: String },
    #[error("training diverged at epoch {epoch} (loss is not finite); try a smaller learning rate")]
    Diverged { epoch: usize },
    #[error("exhaustive search needs {required} evaluations, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
