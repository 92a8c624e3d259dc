use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or missing configuration and inputs; exit code 2.
    Config,
    /// Failure while running; exit code 3.
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

/// `error[config]: ...` or `error[runtime]: ...` on a single line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::Runtime => "runtime",
        };
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{kind}]: {msg}")
    }
}

impl std::error::Error for CliError {}

/// Core errors: bad input data are config errors, everything else is runtime.
impl From<irrl_core::Error> for CliError {
    fn from(e: irrl_core::Error) -> Self {
        use irrl_core::Error as E;
        match e {
            E::WeatherParse { .. } | E::Checkpoint(_) | E::Usage(_) => CliError::config(e.to_string()),
            E::Io { .. } | E::Numeric(_) | E::Domain(_) => CliError::runtime(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::runtime(format!("{}: {e}", path.display()))
}
