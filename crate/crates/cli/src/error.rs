use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const BUDGET: i32 = 4;
    pub const CAPACITY: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration value; `path` is the dotted key.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("usage: {0}")]
    Usage(String),

    /// A records file lacks a required column or holds unparsable values.
    #[error("schema error in {file}: {message}")]
    Schema { file: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] kzqfi::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Serialization(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use kzqfi::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Schema { .. } => exit::USAGE,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::InvalidInput(_) | E::InsufficientData(_) => exit::USAGE,
                E::BudgetExceeded { .. } => exit::BUDGET,
                E::Capacity { .. } => exit::CAPACITY,
                E::Io(_) => exit::FAILURE,
                _ => exit::NUMERICAL,
            },
            CliError::Io { .. } | CliError::Serialization(_) => exit::FAILURE,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Serialization(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
