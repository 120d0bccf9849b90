use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hrikit_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Json { path: PathBuf, line: usize, message: String },
    #[error("TAIHRI_KIT_THREADS: {0}")]
    InvalidThreads(String),
}

impl CliError {
    /// Variant name shown as `error[Name]`.
    pub fn name(&self) -> String {
        match self {
            CliError::Core(e) => e.name(),
            CliError::Io { .. } => "Io".into(),
            CliError::Json { .. } => "Json".into(),
            CliError::InvalidThreads(_) => "InvalidThreads".into(),
        }
    }
}

macro_rules! impl_from_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        })*
    };
}

impl_from_core!(
    hrikit_core::CameraError,
    hrikit_core::CodecError,
    hrikit_core::RewardError,
    hrikit_core::GrpoError,
    hrikit_core::SynthError,
    hrikit_core::EvalError,
    hrikit_core::AlignError
);
