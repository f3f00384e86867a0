use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix/layer shapes. `layer` is the index inside a stack when known.
    #[error("shape error{}: {message}", layer.map(|l| format!(" at layer {l}")).unwrap_or_default())]
    Shape { layer: Option<usize>, message: String },

    /// Bad data values: non-finite inputs, out-of-range labels, empty datasets.
    #[error("validation error: {0}")]
    Validation(String),

    /// Invalid hyperparameters or configuration.
    #[error("config error: {0}")]
    Config(String),

    /// API misuse, e.g. feeding an eval-mode trace to `backward`.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed file contents.
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(message: impl Into<String>) -> Self {
        Error::Shape {
            layer: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_layer(self, index: usize) -> Self {
        match self {
            Error::Shape { layer: None, message } => Error::Shape {
                layer: Some(index),
                message,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }
}
