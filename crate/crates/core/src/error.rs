use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entity `{0}` is not present in the ensemble")]
    MissingEntity(String),

    #[error("facet `{facet}` is not available for entity `{entity}` (missing base facet `{missing}`)")]
    MissingFacet {
        entity: String,
        facet: String,
        missing: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at scenario {row}, hour {col}")]
    NonFinite { row: usize, col: usize },

    #[error("negative value {value} at scenario {row}, hour {col} of {what}")]
    Negative {
        what: String,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration problems map to a distinct CLI exit status.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}
