use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] irsa_rl::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(irsa_rl::Error::Config(_)) | HarnessError::Config(_) => "config",
            HarnessError::Core(_) => "simulation",
            HarnessError::Io { .. } | HarnessError::Csv { .. } => "io",
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "io" => 3,
            _ => 1,
        }
    }

    /// One-line JSON object `{"status":"error","kind":..,"message":..}`.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
