use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("query {query:?} references unknown passage {passage:?}")]
    UnknownPassage { query: String, passage: String },

    #[error("query {0:?} has an empty gold chain")]
    EmptyGoldChain(String),

    #[error("vector {id:?} has dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },

    #[error("vector {0:?} has zero norm and cannot be normalized")]
    ZeroVector(String),

    #[error("malformed embedding file: {0}")]
    Format(String),

    #[error("score list is empty")]
    EmptyScoreList,

    #[error("maximum score {0} is not positive; raw/max normalization is undefined")]
    NonPositiveMax(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("query sets differ: {0}")]
    MismatchedQueries(String),

    #[error("grid has {cells} cells, above the cap of {cap}")]
    GridTooLarge { cells: usize, cap: usize },

    #[error("{0}")]
    Empty(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
