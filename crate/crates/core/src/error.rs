use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("fold count {k} does not divide sample size {n}")]
    Divisibility { n: usize, k: usize },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training set contains no class-{class} observations")]
    EmptyClass { class: u8 },

    #[error("pooled covariance is singular (ridge = {ridge})")]
    SingularCovariance { ridge: f64 },

    /// A trainer failed inside a resampling loop; `stage` names the fold,
    /// repetition or replicate.
    #[error("estimation failed at {stage}: {source}")]
    Estimation {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    /// Raised only under strict coverage.
    #[error("{what} {index} was never in a test set")]
    ZeroCoverage { what: &'static str, index: usize },

    #[error("nothing tested: {0}")]
    NothingTested(String),

    #[error("replicate {replicate}: no two-class bootstrap sample after {attempts} attempts")]
    RetryExhausted { replicate: usize, attempts: usize },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Campaign(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(stage: impl Into<String>, source: Error) -> Self {
        Error::Estimation {
            stage: stage.into(),
            source: Box::new(source),
        }
    }

    /// True for errors caused by bad input or configuration rather than by a
    /// failure while estimating.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Divisibility { .. }
                | Error::DimensionMismatch { .. }
                | Error::Config(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
