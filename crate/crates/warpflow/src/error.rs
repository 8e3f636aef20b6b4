use std::path::PathBuf;

use warpflow_core::Error as CoreError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Codec(#[from] crate::persistence::CodecError),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Invariant(_) => EXIT_INVARIANT,
            Failure::Numeric(_) | Failure::Io { .. } | Failure::Codec(_) => EXIT_NUMERIC,
        }
    }

    /// Short machine-readable tag for reports.
    pub fn tag(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config_error",
            Failure::Numeric(_) => "numeric_failure",
            Failure::Invariant(_) => "invariant_violation",
            Failure::Io { .. } => "io_error",
            Failure::Codec(_) => "codec_error",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Failure {
        Failure::Io { path: path.into(), source }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Failure {
        match e {
            // bad initial data is a property of the configuration
            CoreError::Config(m) | CoreError::Data(m) => Failure::Config(m),
            CoreError::Numeric { .. } | CoreError::StepRejected(_) => Failure::Numeric(e.to_string()),
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;
