use std::fmt;
use std::path::Path;

/// Exit status 1: bad arguments or input data.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status 2: failure during computation or while writing results.
pub const EXIT_COMPUTE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Compute(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn compute(msg: impl Into<String>) -> Self {
        Self::Compute(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Compute(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) | Self::Compute(m) => f.write_str(m),
        }
    }
}

impl From<mfspread::Error> for CliError {
    fn from(e: mfspread::Error) -> Self {
        if e.is_validation() {
            Self::Validation(e.to_string())
        } else {
            Self::Compute(e.to_string())
        }
    }
}
