use std::path::PathBuf;

/// Every failure the pipeline can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric-domain error in {op}: {detail}")]
    NumericDomain { op: &'static str, detail: String },

    #[error("training diverged: non-finite gradient for parameter `{param}`")]
    DivergentGradient { param: String },

    #[error("training diverged: non-finite loss at step {step}")]
    DivergentLoss { step: usize },

    #[error("format error at byte offset {offset}: {detail}")]
    Format { offset: u64, detail: String },

    #[error("ingestion error for item `{item}`: {detail}")]
    Ingestion { item: String, detail: String },

    #[error("teacher cache invalid: {0}")]
    CacheInvalid(String),

    #[error("prompt error: {0}")]
    Prompt(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numbers going bad rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericDomain { .. }
                | Error::DivergentGradient { .. }
                | Error::DivergentLoss { .. }
        )
    }
}
