use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario `{scenario}` cannot run `{analysis}`: {reason}")]
    Unsupported {
        scenario: String,
        analysis: &'static str,
        reason: String,
    },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error(transparent)]
    Core(#[from] scatlab::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
