//! Crate-wide error type.

use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("series {series} is degenerate: {msg}")]
    DegenerateSeries { series: usize, msg: String },

    #[error("state error: {0}")]
    State(String),

    /// Invalid contamination or search-space specification.
    #[error("invalid spec: {0}")]
    Spec(String),

    #[error("capacity exhausted: {0}")]
    Capacity(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dataset has no missing cells")]
    NothingToImpute,

    #[error("registry error: {0}")]
    Registry(String),

    /// A registered algorithm broke the pass-through or completeness contract.
    #[error("algorithm contract violated: {0}")]
    Contract(String),

    #[error("no target cells to score")]
    EmptyMask,

    #[error("degenerate metric input: {0}")]
    DegenerateMetric(String),

    #[error("complexity bound exceeded: {0}")]
    Complexity(String),

    #[error("insufficient data: {0}")]
    Data(String),

    /// Pipeline config rejected before any work started.
    #[error("invalid config: {section}.{key}: {msg}")]
    Validation {
        section: String,
        key: String,
        msg: String,
    },

    /// A pipeline stage failed at run time.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn stage(stage: &str, source: Error) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
