use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid block partition: {0}")]
    Partition(String),

    #[error("matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("block {block} is rank deficient")]
    RankDeficientBlock { block: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("column {column} has norm {norm}, expected unit norm")]
    NotUnitNorm { column: usize, norm: f64 },

    #[error("degenerate dictionary: {0}")]
    DegenerateDictionary(String),

    #[error("residual is orthogonal to every support block")]
    DegenerateResidual,

    #[error("invalid stopping rule: {0}")]
    InvalidStoppingRule(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration {iteration}: {source}")]
    Recovery {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bound {label} violated: lhs = {lhs:e}, rhs = {rhs:e}, seed = {seed:?}")]
    BoundViolated {
        label: String,
        lhs: f64,
        rhs: f64,
        seed: Option<u64>,
    },

    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Replay seed attached to this error, if any.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Error::Trial { seed, .. } => Some(*seed),
            Error::BoundViolated { seed, .. } => *seed,
            _ => None,
        }
    }
}
