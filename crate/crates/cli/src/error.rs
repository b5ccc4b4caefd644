use metagpe::GpeError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: `{key}`: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Numerics(#[from] GpeError),
}

/// Coarse failure classes reported on exit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Divergence,
    Io,
    Fit,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Divergence => "divergence",
            Category::Io => "io",
            Category::Fit => "fit",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Divergence => 3,
            Category::Io => 4,
            Category::Fit => 5,
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            CliError::Config { .. } => Category::Config,
            CliError::Io { .. } | CliError::Format(_) => Category::Io,
            CliError::Numerics(e) => match e {
                GpeError::Divergence { .. } => Category::Divergence,
                GpeError::FitFailure { .. } | GpeError::NonConvergence { .. } => Category::Fit,
                GpeError::Sink(_) => Category::Io,
                _ => Category::Config,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
