use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("degenerate variance for `{0}`")]
    DegenerateVariance(String),

    #[error("stratum {0} has no subjects")]
    MissingStratum(usize),

    #[error("unsupported estimand kind: {0}")]
    UnsupportedKind(String),

    #[error("cholesky factorization failed: {0}")]
    Cholesky(String),

    #[error("tolerance unreachable: {0}")]
    ToleranceUnreachable(String),

    #[error("{0}")]
    Redirect(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
