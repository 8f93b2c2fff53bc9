use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("attribute `{0}` is not also a token (schema must be reflexive)")]
    NonReflexive(String),
    #[error("{0} list is empty")]
    EmptyAlphabet(&'static str),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("node already has a child under attribute {0}")]
    DuplicateChild(usize),
    #[error("embedding dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("decode budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("could not separate {n} position codes in dimension {k} below {bound} after {retries} draws")]
    SeparationUnachievable {
        n: usize,
        k: usize,
        bound: f64,
        retries: usize,
    },
    #[error("path of length {len} exceeds position capacity {capacity}")]
    PathTooLong { len: usize, capacity: usize },
    #[error("pattern of length {arity} exceeds the {max} available argument attributes")]
    ArityExceeded { arity: usize, max: usize },
    #[error(
        "pattern of length {expected} has squared norm rounding to {measured}; dimension too small"
    )]
    ArityMismatch { expected: usize, measured: usize },
    #[error("no rule applies and {slots} slots remain")]
    NoParse { slots: usize },
    #[error("step budget of {0} exceeded")]
    StepBudgetExceeded(usize),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
