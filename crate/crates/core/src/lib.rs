//! Static quality analysis of C# unit tests, prompt and completion
//! processing, reward labeling, dataset curation and a toy PPO core.

pub mod completion;
pub mod curation;
pub mod error;
pub mod parser;
pub mod prompt;
pub mod quality;
pub mod reward;
pub mod rl;

pub use completion::{assemble_record, truncate_completion, RawCompletion, RecordMeta};
pub use curation::{
    dedupe, filter_golden, split_by_repository, subsample, CorpusRecord, RecordSource,
    SplitManifest, SplitName, SplitSpec, Splits,
};
pub use error::{AnalyzerError, CurationError, ParseError, PromptError, RewardError, RlError};
pub use parser::{
    check_syntax, parse_focal_file, parse_test_method, tokenize, FocalFileTree, Span,
    SyntaxVerdict, TestSyntaxTree, Token, TokenKind,
};
pub use prompt::{build_prompt, estimate_tokens, render_level, BudgetConfig, PromptRecord};
pub use quality::{analyze, score_corpus, CorpusStats, Property, QualityReport, ScoreConfig};
pub use reward::{
    combined_reward, individual_reward, label_dataset, resample_balanced, LabeledRecord, Polarity,
    RewardScheme, Strategy,
};
pub use rl::{PolicyTable, SamplingParams, TrainConfig, TrainingMetrics};
