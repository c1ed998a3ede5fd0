use std::fmt;
use std::path::Path;

pub type CliResult<T> = Result<T, CliError>;

/// Exit status 1 for usage and contract violations, 2 for I/O failures.
#[derive(Debug)]
pub enum CliError {
    Contract(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Contract(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Contract(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<dupliq_core::Error> for CliError {
    fn from(e: dupliq_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Contract(e.to_string())
        }
    }
}

impl From<dupliq_learn::Error> for CliError {
    fn from(e: dupliq_learn::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Contract(e.to_string())
        }
    }
}

impl From<dupliq_neural::Error> for CliError {
    fn from(e: dupliq_neural::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Contract(e.to_string())
        }
    }
}
