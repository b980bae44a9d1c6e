use thiserror::Error;

/// A single validation problem, tied to the config key (or argument) that caused it.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Bad inputs: rejected before any numerics run. CLI exit code 2.
    #[error("validation failed: {}", format_issues(.0))]
    Validation(Vec<Issue>),
    /// The numerics themselves failed (blow-up, non-convergence, broken invariant).
    /// CLI exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(Issue::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![Issue {
            field: field.into(),
            message: message.into(),
        }])
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal advisory raised during a run; surfaced in the run manifest.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Warning {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}
