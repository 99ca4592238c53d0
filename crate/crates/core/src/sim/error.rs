use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// The document failed to parse or violated its schema.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// The document parsed but refers to something that does not exist.
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    /// An action was applied to a world that has already terminated.
    #[error("world is terminated; no further actions are accepted")]
    Terminated,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
