use thiserror::Error;

/// Errors raised by the identification library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ARX orders: {0}")]
    InvalidOrders(String),

    #[error("no output sequences supplied")]
    NoSequences,

    #[error("sequence `{label}` has {len} samples but at least {required} are required")]
    SequenceTooShort {
        label: String,
        len: usize,
        required: usize,
    },

    #[error("sequence `{label}` contains a non-finite sample at t = {t}")]
    NonFiniteSample { label: String, t: usize },

    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no identifiable component: the lifted matrix is identically zero")]
    NoIdentifiableComponent,

    #[error("regressor matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("enumeration budget exceeded: {patterns} patterns needed, budget is {budget}")]
    BudgetExceeded { patterns: u64, budget: u64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("linear solve failed: {0}")]
    Factorization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
