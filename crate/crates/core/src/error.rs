use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown catalog entry `{0}`")]
    UnknownField(String),

    #[error("catalog entry `{field}` failed self-check `{check}`: {detail}")]
    CorruptedCatalog {
        field: String,
        check: &'static str,
        detail: String,
    },

    #[error("catalog entry `{field}` is incomplete: {detail}")]
    CatalogIncomplete { field: String, detail: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported signature: {0}")]
    UnsupportedSignature(String),

    #[error("predicted point count {predicted:.3e} exceeds the enumeration budget {budget}")]
    BudgetExceeded { predicted: f64, budget: u64 },

    #[error("the ball contains no nonzero lattice point")]
    NoPoints,

    #[error("non-vanishing determinant violated at coordinates {coords:?} (|det| = {abs_det:e})")]
    NvdViolation { coords: Vec<i64>, abs_det: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("degenerate order: {0}")]
    DegenerateOrder(String),

    #[error("the zero element has no principal ideal index")]
    ZeroElement,

    #[error("element is not in the order: {0}")]
    NotInOrder(String),

    #[error("insufficient radius span: {0}")]
    Span(String),

    #[error("radius grids differ: {0}")]
    GridMismatch(String),

    #[error("integer overflow in exact arithmetic: {0}")]
    Overflow(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BudgetExceeded { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn corrupted(field: &str, check: &'static str, detail: impl Into<String>) -> Self {
        Error::CorruptedCatalog {
            field: field.to_string(),
            check,
            detail: detail.into(),
        }
    }
}
