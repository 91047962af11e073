use thiserror::Error;

pub type Result<T, E = QfeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QfeError {
    #[error("empty input")]
    EmptyInput,
    #[error("format error: missing column {0}")]
    MissingColumn(String),
    #[error("parse error at row {row}, column {column}: {value:?} is not a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unusable sequence: {0}")]
    UnusableSequence(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("unknown AU category {0:?}")]
    UnknownCategory(String),
    #[error("missing feature: {0}")]
    MissingFeature(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("singular design matrix: {0}")]
    SingularDesign(String),
    #[error("numerical error: {message} (condition number {condition:.3e})")]
    Numerical { message: String, condition: f64 },
    #[error("degenerate factor structure: {0}")]
    DegenerateStructure(String),
    #[error("undefined reference: every reference value is zero")]
    UndefinedReference,
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("zero spread: {0}")]
    ZeroSpread(String),
    #[error("empty report: {0}")]
    EmptyReport(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl QfeError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QfeError::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        QfeError::Shape(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        QfeError::InsufficientData(msg.into())
    }
}
