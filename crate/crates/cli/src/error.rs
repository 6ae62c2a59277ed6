use thiserror::Error;

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("{experiment}: {source}")]
    Numeric {
        experiment: String,
        #[source]
        source: trimode::Error,
    },
    #[error("{context}: {message}")]
    Output { context: String, message: String },
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        let path = if path.is_empty() || path == "." { "$".to_string() } else { path.to_string() };
        CliError::Config {
            path,
            message: message.into(),
        }
    }

    pub fn output(context: impl Into<String>, message: impl ToString) -> Self {
        CliError::Output {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// 2 for configuration errors, 3 for numeric and output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numeric { .. } | CliError::Output { .. } => 3,
        }
    }
}
