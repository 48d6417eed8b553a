use std::path::{Path, PathBuf};

use flexfit_core::encoding::EncodingError;
use flexfit_core::extract::ExtractError;
use flexfit_core::raster::RasterError;
use flexfit_core::train::TrainError;
use flexfit_inversion::InversionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 for configuration and input problems, 3 for
    /// numerical aborts, 1 for output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Output { .. } => 1,
        }
    }

    pub fn input(path: &Path, message: impl ToString) -> Self {
        Self::Input {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        Self::Output {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } | TrainError::EmptyMesh { .. } => Self::Numerical(e.to_string()),
            TrainError::Encoding(EncodingError::NonFinite { .. }) => Self::Numerical(e.to_string()),
            TrainError::Autodiff(_) => Self::Numerical(e.to_string()),
            TrainError::Extract(ExtractError::InvalidVertex { .. } | ExtractError::InvalidCube { .. }) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<InversionError> for CliError {
    fn from(e: InversionError) -> Self {
        match e {
            InversionError::NonFiniteFitness { .. } | InversionError::Degenerate { .. } | InversionError::Oracle { .. } => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<EncodingError> for CliError {
    fn from(e: EncodingError) -> Self {
        match e {
            EncodingError::NonFinite { .. } => Self::Numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::InvalidVertex { .. } | ExtractError::InvalidCube { .. } => Self::Numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        Self::Config(e.to_string())
    }
}
