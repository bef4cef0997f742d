use std::fmt;

/// Dotted/indexed location inside a document or config, e.g. `layers[1].weights`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldPath(pub String);

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("<root>")
        } else {
            f.write_str(&self.0)
        }
    }
}

impl From<&str> for FieldPath {
    fn from(s: &str) -> Self {
        FieldPath(s.to_owned())
    }
}

impl From<String> for FieldPath {
    fn from(s: String) -> Self {
        FieldPath(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("numeric domain error: {0}")]
    Numeric(String),

    #[error("invalid config at {path}: {message}")]
    Config { path: FieldPath, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("load error at {path}: {message}")]
    Load { path: FieldPath, message: String },

    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("render error: {0}")]
    Render(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<FieldPath>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn load(path: impl Into<FieldPath>, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Field path carried by config and load errors.
    pub fn field_path(&self) -> Option<&FieldPath> {
        match self {
            Error::Config { path, .. } | Error::Load { path, .. } => Some(path),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
