use std::fmt;

/// Errors surfaced by the command line, each mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    /// A setting is missing, malformed or out of range.
    Config {
        field: String,
        reason: String,
    },
    /// A simulation or statistic failed at run time.
    Core(renewal_gauss_core::Error),
    Io(String),
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Config { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, reason } => write!(f, "invalid {field}: {reason}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<renewal_gauss_core::Error> for CliError {
    fn from(e: renewal_gauss_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
