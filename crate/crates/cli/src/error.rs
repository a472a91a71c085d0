use synthqa::analysis::AnalysisError;
use synthqa::corpus::CorpusError;
use synthqa::evaluation::EvalError;
use synthqa::generation::GenerationError;
use thiserror::Error;

/// Each variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Config(m) => CliError::Config(m),
            GenerationError::Data(m) => CliError::Data(m),
            GenerationError::Prompt(_) | GenerationError::RunExists(_) => CliError::Config(e.to_string()),
            GenerationError::Gateway(_) | GenerationError::Unit { .. } => CliError::Backend(e.to_string()),
            GenerationError::NoQuestions | GenerationError::Io { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Embedding(_) => CliError::Backend(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
