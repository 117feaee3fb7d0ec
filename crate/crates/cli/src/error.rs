use std::process::ExitCode;

use surfhjb_core::{BandError, CloudError, GeometryError, MetricsError, PathError, SolveError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Io { .. } => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<BandError> for CliError {
    fn from(e: BandError) -> Self {
        match e {
            BandError::BandTooThin { .. }
            | BandError::BandTooThick { .. }
            | BandError::GridTooSmall(_)
            | BandError::EmptyTarget => CliError::Config(e.to_string()),
            BandError::Geometry(GeometryError::InvalidSurface(_)) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NoTargets
            | SolveError::ReachTooSmall { .. }
            | SolveError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CloudError> for CliError {
    fn from(e: CloudError) -> Self {
        match e {
            CloudError::TooFewPoints(_)
            | CloudError::DuplicatePoint(..)
            | CloudError::Parse { .. }
            | CloudError::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::InvalidSurface(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::MissingControls => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
