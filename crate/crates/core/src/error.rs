use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("fatal syntax error at byte {offset}: {message}")]
    FatalSyntax { message: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzerError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("focal method `{0}` not found in focal file")]
    FocalNotFound(String),
    #[error("prompt needs {tokens} tokens at the most concise level, budget is {budget}")]
    PromptTooLong { tokens: usize, budget: usize },
    #[error("invalid level {0}, expected 1..=4")]
    InvalidLevel(u8),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("invalid reward scheme: {0}")]
    InvalidScheme(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurationError {
    #[error("need at least {needed} distinct repositories, found {found}")]
    TooFewRepos { needed: usize, found: usize },
    #[error("invalid split specification: {0}")]
    InvalidSplit(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
