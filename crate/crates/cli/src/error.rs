//! Distinct exit codes per failure family, with a machine-readable error
//! record on stderr. Code 2 (usage) belongs to the argument parser; the
//! codes here start where it stops.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed config files, invalid field values, schema drift in CSVs.
    #[error("{0}")]
    Config(String),
    /// An input file or directory this command needs does not exist.
    #[error("{0}")]
    MissingInput(String),
    /// The inputs exist but their content is unusable (bad dataset lines,
    /// checksum mismatches, vocabulary violations, sizes out of range).
    #[error("{0}")]
    Data(String),
    /// The computation itself failed: numeric blow-ups, kernel errors.
    #[error("{0}")]
    Runtime(String),
    /// A report was requested over an experiment with no completed runs.
    #[error("{0}")]
    EmptyExperiment(String),
    /// Writing outputs failed.
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::MissingInput(_) => 4,
            CliError::Data(_) => 5,
            CliError::Runtime(_) => 6,
            CliError::EmptyExperiment(_) => 7,
            CliError::Io(_) => 8,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput(_) => "missing-input",
            CliError::Data(_) => "data",
            CliError::Runtime(_) => "runtime",
            CliError::EmptyExperiment(_) => "empty-experiment",
            CliError::Io(_) => "io",
        }
    }

    /// The single-line JSON record printed to stderr on failure.
    pub fn record(&self) -> String {
        serde_json::json!({
            "code": self.exit_code(),
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<tprlab_tensor::TensorError> for CliError {
    fn from(e: tprlab_tensor::TensorError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<tprlab_models::ModelError> for CliError {
    fn from(e: tprlab_models::ModelError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<tprlab_tasks::TaskError> for CliError {
    fn from(e: tprlab_tasks::TaskError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<tprlab_harness::HarnessError> for CliError {
    fn from(e: tprlab_harness::HarnessError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<tprlab_analysis::AnalysisError> for CliError {
    fn from(e: tprlab_analysis::AnalysisError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
