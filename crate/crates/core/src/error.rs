use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("no data rows")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate peak for `{0}`: peak on the first reported day leaves no rising edge")]
    DegeneratePeak(String),

    #[error("filter `{0}` selected no countries")]
    EmptyCohort(String),

    #[error("degenerate target `{0}`: constant response")]
    DegenerateTarget(String),

    #[error("singular design: column `{0}` is linearly dependent on the others")]
    SingularDesign(String),

    #[error("model `{target}`: {source}")]
    Target {
        target: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parameters rejected: {0}")]
    Rejected(String),

    #[error("non-finite likelihood: {0}")]
    NonFiniteLikelihood(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("degenerate cohort: `{0}` has a zero falling-edge mean")]
    DegenerateCohort(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// The innermost error, looking through stage and target wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Target { source, .. } => source.root(),
            other => other,
        }
    }
}
