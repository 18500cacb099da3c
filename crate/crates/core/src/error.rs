use thiserror::Error;

/// Errors raised by the screening, fitting and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("columns are numerically collinear (pivot {pivot} below tolerance)")]
    RankDeficient { pivot: usize },

    #[error("requested size {requested} is invalid for {available} candidates")]
    BadSize { requested: usize, available: usize },

    #[error("ridge system is singular")]
    SingularSystem,

    #[error("invalid penalty or solver specification: {0}")]
    BadSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex pivot limit of {0} reached")]
    PivotLimit(usize),

    #[error("classification labels contain a single class")]
    OneClassOnly,

    #[error("no lambda on the grid yields a support of size at most {0}")]
    TargetSizeUnreachable(usize),

    #[error("correlation parameter rho = {0} is not allowed for this design")]
    BadRho(f64),

    #[error("inner selector returned an empty set at step {0}")]
    EmptyStep(usize),

    #[error("singular draw limit exceeded ({0} consecutive redraws)")]
    SingularDraw(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {replicate}, method {method}: {source}")]
    Replicate {
        replicate: usize,
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// True for failures caused by the numerics rather than by the inputs or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient { .. }
            | Error::SingularSystem
            | Error::Infeasible
            | Error::Unbounded
            | Error::PivotLimit(_)
            | Error::EmptyStep(_)
            | Error::SingularDraw(_)
            | Error::TargetSizeUnreachable(_) => true,
            Error::Stage { source, .. } | Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
