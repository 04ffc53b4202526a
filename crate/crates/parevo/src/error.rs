use std::path::Path;

/// Failures of a CLI run, each mapped to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or malformed input: exit 2.
    #[error("input error: {0}")]
    Input(String),
    /// Too little data for a stage: exit 3.
    #[error("insufficient data in stage {stage}: {message}")]
    Insufficient { stage: &'static str, message: String },
    /// The synthetic generator gave up: exit 4.
    #[error("generator aborted: {0}")]
    Generator(String),
    /// Anything else: exit 1.
    #[error("{stage}: {message}")]
    Internal { stage: &'static str, message: String },
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    /// Classify a core error raised inside `stage`.
    pub fn stage(stage: &'static str, err: parevo_core::Error) -> Self {
        use parevo_core::Error as E;
        let message = err.to_string();
        match err {
            E::InsufficientData(_) | E::Underdetermined(_) | E::NotMeanReverting(_) => {
                CliError::Insufficient { stage, message }
            }
            E::GeneratorAbort { .. } => CliError::Generator(message),
            _ => CliError::Internal { stage, message },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Insufficient { .. } => 3,
            CliError::Generator(_) => 4,
            CliError::Internal { .. } => 1,
        }
    }
}
