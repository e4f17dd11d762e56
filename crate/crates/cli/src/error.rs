use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: qnls::Error,
    },
    #[error("{context}: {msg}")]
    Failed { context: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for configuration problems, 2 for everything that fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            _ => 2,
        }
    }

    pub fn numerical(context: impl Into<String>) -> impl FnOnce(qnls::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Numerical { context, source }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }
}
