//! Reduces a raw completion to a single test method.

use serde::{Deserialize, Serialize};

use crate::curation::{CorpusRecord, RecordSource};
use crate::parser::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCompletion {
    /// The `[TestMethod]` stub the prompt ends with.
    pub prompt_hint: String,
    pub completion_text: String,
}

impl RawCompletion {
    pub fn new(prompt_hint: impl Into<String>, completion_text: impl Into<String>) -> Self {
        RawCompletion {
            prompt_hint: prompt_hint.into(),
            completion_text: completion_text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordMeta {
    pub repo: String,
    pub focal_class: String,
    pub focal_method: String,
    #[serde(default)]
    pub source: RecordSource,
}

/// Where the completion is cut and which rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Unindented closing brace; the cut keeps the brace.
    ClosingBrace(usize),
    /// Start of the second `[TestMethod]`; the cut drops it.
    NextTestMethod(usize),
}

impl Boundary {
    pub fn cut(self) -> usize {
        match self {
            Boundary::ClosingBrace(at) => at + 1,
            Boundary::NextTestMethod(at) => at,
        }
    }

    fn offset(self) -> usize {
        match self {
            Boundary::ClosingBrace(at) | Boundary::NextTestMethod(at) => at,
        }
    }
}

/// Offsets of every `[TestMethod` or `[DataTestMethod` attribute opening in
/// the token stream.
pub fn test_method_attributes(tokens: &[Token]) -> Vec<usize> {
    let significant: Vec<&Token> = tokens.iter().filter(|t| !t.kind.is_trivia()).collect();
    significant
        .windows(2)
        .filter(|w| {
            w[0].is_punct("[")
                && w[1].kind == TokenKind::Identifier
                && matches!(w[1].text.as_str(), "TestMethod" | "DataTestMethod")
        })
        .map(|w| w[0].byte_offset)
        .collect()
}

/// Lexer-level count of test attributes outside literals and comments.
pub fn count_test_methods(source: &str) -> usize {
    test_method_attributes(&tokenize(source)).len()
}

/// Finds the earliest boundary inside the completion part of `full`, which
/// starts at `hint_len`.
pub fn find_boundary(full: &str, hint_len: usize) -> Option<Boundary> {
    let tokens = tokenize(full);
    let brace = tokens
        .iter()
        .find(|t| {
            t.byte_offset >= hint_len
                && t.kind == TokenKind::Punctuation
                && t.text == "}"
                && t.byte_offset > 0
                && full.as_bytes()[t.byte_offset - 1] == b'\n'
        })
        .map(|t| Boundary::ClosingBrace(t.byte_offset));
    let next = test_method_attributes(&tokens)
        .into_iter()
        .skip(1)
        .find(|&at| at >= hint_len)
        .map(Boundary::NextTestMethod);
    match (brace, next) {
        (Some(b), Some(n)) => Some(if n.offset() < b.offset() { n } else { b }),
        (b, n) => b.or(n),
    }
}

/// `prompt_hint + completion`, cut at the earlier of an unindented `}`
/// (kept) or a second `[TestMethod]` (dropped).
pub fn truncate_completion(raw: &RawCompletion) -> String {
    let mut full = String::with_capacity(raw.prompt_hint.len() + raw.completion_text.len());
    full.push_str(&raw.prompt_hint);
    full.push_str(&raw.completion_text);
    if let Some(b) = find_boundary(&full, raw.prompt_hint.len()) {
        full.truncate(b.cut());
    }
    full
}

/// Pairs a prompt with its truncated test. A blank completion gives an
/// empty test.
pub fn assemble_record(prompt: &str, raw: &RawCompletion, meta: &RecordMeta) -> CorpusRecord {
    let test = if raw.completion_text.trim().is_empty() {
        String::new()
    } else {
        truncate_completion(raw)
    };
    CorpusRecord {
        repo: meta.repo.clone(),
        focal_class: meta.focal_class.clone(),
        focal_method: meta.focal_method.clone(),
        prompt: prompt.to_string(),
        test,
        source: meta.source,
    }
}
