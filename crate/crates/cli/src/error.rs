use std::fmt;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// The scenario file could not be read or breaks a rule.
    Scenario(hfsl_core::Error),
    /// A checked property failed; carries the summary.
    Property(String),
    Core(hfsl_core::Error),
    Io(String, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Scenario(_) => EXIT_INFEASIBLE,
            CliError::Property(_) => EXIT_PROPERTY,
            CliError::Core(_) | CliError::Io(..) => EXIT_FAILURE,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, e: std::io::Error) -> Self {
        CliError::Io(path.as_ref().display().to_string(), e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Scenario(e) => write!(f, "scenario rejected: {e}"),
            CliError::Property(m) => write!(f, "property check failed: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{p}: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hfsl_core::Error> for CliError {
    fn from(e: hfsl_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
