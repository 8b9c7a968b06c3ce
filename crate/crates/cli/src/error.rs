use std::path::{Path, PathBuf};

use nssm_unc_core::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Stale(String),

    #[error("missing {stage} output {path}; run `nssm-unc {stage}` first")]
    Missing { stage: &'static str, path: PathBuf },

    #[error(transparent)]
    Numeric(#[from] CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Stable machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Stale(_) => "stale",
            CliError::Missing { .. } => "missing",
            CliError::Numeric(CoreError::Config(_)) => "config",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "parse" => 4,
            "stale" => 5,
            "missing" => 6,
            _ => 7,
        }
    }
}
