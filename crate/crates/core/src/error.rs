use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Internal => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
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

    #[error("duplicate entity id `{0}`")]
    DuplicateEntity(String),

    #[error("coordinate out of range: ({lat}, {lon})")]
    CoordinateOutOfRange { lat: f64, lon: f64 },

    #[error("unknown entity `{id}`{}", suggestion_suffix(.suggestions))]
    UnknownEntity { id: String, suggestions: Vec<String> },

    #[error("no link set loaded for language `{0}`")]
    UnknownLanguage(String),

    #[error("invalid language code `{0}`")]
    InvalidLanguage(String),

    #[error("no country polygons for language `{0}`")]
    NoPolygons(String),

    #[error("degenerate polygon with {0} vertices (need at least 3)")]
    DegeneratePolygon(usize),

    #[error("undefined relevance for ({source_id}, {target_id}): pair never clicked")]
    UndefinedRelevance { source_id: String, target_id: String },

    #[error("{0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("entity `{0}` has no embedding")]
    NotEmbedded(String),

    #[error("undefined correlation: constant series")]
    UndefinedCorrelation,

    #[error("degenerate Milne-Witten denominator: |E|={total} <= min in-degree {min_in}")]
    DegenerateRelatedness { total: usize, min_in: usize },

    #[error("feature order mismatch: model expects [{expected}], got [{actual}]")]
    FeatureOrderMismatch { expected: String, actual: String },

    #[error("unversioned model")]
    UnversionedModel,

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", suggestions.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::Internal(_) => ErrorClass::Internal,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
