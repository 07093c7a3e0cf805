use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Parse failure or invalid value in the configuration file.
    #[error("config error{}: {message}", if path.is_empty() { String::new() } else { format!(" at `{path}`") })]
    Config { path: String, message: String },

    /// A simulation precondition failed before or during the run.
    #[error("validation failed: {0}")]
    Validation(cqbm_core::Error),

    /// A numerical result missed its requested tolerance.
    #[error("numerical failure: {0}")]
    Numerical(cqbm_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn invalid(path: &str, message: impl Into<String>) -> Self {
        Self::Config { path: path.to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config { .. } | Self::Validation(_) => ExitCode::from(2),
            Self::Numerical(_) => ExitCode::from(3),
            Self::Io(_) | Self::Csv(_) | Self::Json(_) => ExitCode::FAILURE,
        }
    }
}

impl From<cqbm_core::Error> for CliError {
    fn from(e: cqbm_core::Error) -> Self {
        use cqbm_core::Error as E;
        match e {
            E::QuadratureFailure { .. } | E::NegativeEigenvalueBeyondTolerance { .. } => Self::Numerical(e),
            _ => Self::Validation(e),
        }
    }
}
