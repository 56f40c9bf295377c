use thiserror::Error;

/// Errors raised by density construction, fitting and I/O.
#[derive(Debug, Error)]
pub enum FbdeError {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("negative smoothing: {0}")]
    NegativeSmoothing(f64),

    #[error("degenerate marginal: sensitive value {0} has zero probability")]
    DegenerateMarginal(usize),

    #[error("no target attribute in schema")]
    NoTarget,

    #[error("degenerate conditional: p[Y=y|A={0}] is zero")]
    DegenerateConditional(usize),

    #[error("absolute continuity violated at cell {0}")]
    AbsoluteContinuity(usize),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("classifier unbounded: output {0} is not finite")]
    ClassifierUnbounded(f64),

    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),

    #[error("WLA violated: gamma_p = {gamma_p}, gamma_q = {gamma_q}")]
    WlaViolated { gamma_p: f64, gamma_q: f64 },

    #[error("unseen category {value:?} in column {column}")]
    UnseenCategory { column: String, value: String },

    #[error("NaN cell in column {column} at row {row}")]
    NanCell { column: String, row: usize },

    #[error("unrepresented sensitive value {0}")]
    UnrepresentedSensitive(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FbdeError>;
