//! Experiment driver: JSON config in, deterministic CSV/JSON artifacts out.

pub mod config;
pub mod experiments;
pub mod manifest;

pub use config::ExperimentConfig;
pub use experiments::{run_experiment, Experiment, Outcome};

use parametrix_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("instability: {0}")]
    Instability(CoreError),
    #[error("{0}")]
    Core(CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Instability { .. } | CoreError::RayBlowup { .. } => RunError::Instability(e),
            _ => RunError::Core(e),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Instability(_) => 3,
            _ => 1,
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 4;
