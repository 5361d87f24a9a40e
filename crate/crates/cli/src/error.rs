use serde::Serialize;

/// Failure of a run, rendered as JSON on stderr by the binary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    /// Stable machine-readable category.
    pub kind: ErrorKind,
    pub message: String,
    /// Individual problems, e.g. every invalid config field.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    ResourceGuard,
    Io,
    Simulation,
    Input,
}

impl ErrorKind {
    /// Process exit code for this kind of failure.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config | ErrorKind::ResourceGuard | ErrorKind::Input => 2,
            ErrorKind::Io | ErrorKind::Simulation => 1,
        }
    }
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)?;
        for d in &self.details {
            write!(f, "; {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<lrtfim::Error> for CliError {
    fn from(e: lrtfim::Error) -> Self {
        CliError::new(ErrorKind::Simulation, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ErrorKind::Io, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
