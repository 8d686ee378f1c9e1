use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents (.egr, .ntc, manifest, labels, config).
    #[error("format error: {0}")]
    Format(String),

    /// Tensor/layer shape mismatch; `ctx` names the offending layer or tensor.
    #[error("shape mismatch in {ctx}: {detail}")]
    Shape { ctx: String, detail: String },

    #[error("invalid config: {0}")]
    Config(String),

    /// Violated operation precondition or domain invariant.
    #[error("{0}")]
    Invalid(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(ctx: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            ctx: ctx.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
