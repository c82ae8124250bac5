use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NOT_DICHOTOMOUS: i32 = 2;
    pub const ACCURACY: i32 = 3;
    pub const DISAGREEMENT: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] riccati_core::Error),

    #[error("{failed} check(s) failed")]
    ChecksFailed { failed: usize },

    #[error("{failed} scan row(s) hit the spectrum or failed")]
    ScanRows { failed: usize },

    #[error("contour and oracle paths disagree on {failed} system(s)")]
    Disagreement { failed: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use riccati_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv { .. } => exit::CONFIG,
            CliError::Core(E::NotDichotomous { .. }) => exit::NOT_DICHOTOMOUS,
            CliError::Core(E::Parameter(_) | E::Dimension { .. } | E::Generation(_)) => exit::CONFIG,
            CliError::Core(_) | CliError::ChecksFailed { .. } | CliError::ScanRows { .. } => exit::ACCURACY,
            CliError::Disagreement { .. } => exit::DISAGREEMENT,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
