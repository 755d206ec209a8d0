use std::fmt;

/// A failed run, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or config; nothing was computed. Exit 1.
    Validation(String),
    /// The computation or I/O failed. Exit 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

pub fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

pub fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
