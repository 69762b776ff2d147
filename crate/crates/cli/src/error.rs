use thiserror::Error;

/// Failures of a command, split by exit code: input problems exit with 2,
/// failures of the computation itself with 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid form: {0}")]
    Validation(String),

    #[error("invalid form: {0}")]
    Core(periodic_forms::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Domain(periodic_forms::Error),
}

impl CliError {
    /// Construction errors of the core types are validation errors.
    pub fn from_core(e: periodic_forms::Error) -> Self {
        Self::Core(e)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation(_) | Self::Core(_) | Self::Usage(_) => 2,
            Self::Domain(_) => 1,
        }
    }
}

impl From<periodic_forms::Error> for CliError {
    /// Errors raised while computing on a valid form.
    fn from(e: periodic_forms::Error) -> Self {
        Self::Domain(e)
    }
}
