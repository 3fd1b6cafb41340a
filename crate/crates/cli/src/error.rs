use crate::expr::ExprError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at '{path}' (line {line}, column {column}): {message}")]
    Config {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid expression in {field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ExprError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("task '{cli}' on the command line disagrees with task '{config}' in the config")]
    TaskMismatch { cli: String, config: String },

    #[error("{0}")]
    MissingInput(String),

    #[error("invalid MA_THREADS value '{0}'")]
    Threads(String),

    #[error(transparent)]
    Core(#[from] cmatorus_core::Error),
}

impl CliError {
    /// Stable machine-readable tag, reusing the solver's tags for its errors.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Expression { .. } => "expression",
            CliError::Io { .. } => "io",
            CliError::TaskMismatch { .. } => "task_mismatch",
            CliError::MissingInput(_) => "missing_input",
            CliError::Threads(_) => "threads",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::Config { path, line, column, .. } = self {
            v["path"] = serde_json::json!(path);
            v["line"] = serde_json::json!(line);
            v["column"] = serde_json::json!(column);
        }
        v
    }
}
