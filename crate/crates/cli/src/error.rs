use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or a violated hypothesis.
    Guard(String),
    /// A numerical failure or a missed certificate.
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Guard(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Guard(m) => write!(f, "guard: {m}"),
            CliError::Numerical(m) => write!(f, "numerical: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl From<tentlab::Error> for CliError {
    fn from(e: tentlab::Error) -> Self {
        use tentlab::Error::*;
        match e {
            Guard(m) => CliError::Guard(m),
            Config(_) | Domain(_) => CliError::Guard(e.to_string()),
            Range(_) | NonConvergence { .. } | Numerical(_) => CliError::Numerical(e.to_string()),
            Io(_) | Format(_) => CliError::Io(e.to_string()),
        }
    }
}
