use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid label: {0:?}")]
    InvalidLabel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing resource {path}: {hint}")]
    Resource { path: PathBuf, hint: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class index {index} out of range for vocabulary of size {size}")]
    Index { index: usize, size: usize },

    #[error("label {0:?} has no embeddable tokens")]
    NoEmbedding(String),

    #[error("cannot compose an empty list of saliency maps")]
    EmptyComposition,

    #[error("data leak: label {label:?} belongs to the test partition")]
    DataLeak { label: String },

    #[error("co-occurrence undefined: no images contain {0:?}")]
    UndefinedFraction(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn resource(path: impl Into<PathBuf>, hint: impl Into<String>) -> Self {
        Error::Resource {
            path: path.into(),
            hint: hint.into(),
        }
    }
}
