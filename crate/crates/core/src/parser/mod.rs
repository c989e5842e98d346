//! C# subset parsing: a lossless lexer, a statement-level parser for single
//! test methods, and a member-level parser for focal files.

mod focal;
mod lexer;
mod method;

pub use focal::{parse_focal_file, ClassNode, FocalFileTree, Member, MemberKind, NamespaceNode};
pub use lexer::{is_keyword, tokenize, Token, TokenKind};
pub use method::{
    check_syntax, parse_test_method, Attribute, CatchClause, Comment, Expr, Invocation,
    LocalDeclaration, Statement, StatementKind, SwitchSection, SyntaxVerdict, TestSyntaxTree,
};

use serde::{Deserialize, Serialize};

/// Half-open byte range into the parsed source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    pub fn encloses(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn text<'s>(&self, source: &'s str) -> &'s str {
        &source[self.start..self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Fatal,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxDiagnostic {
    pub message: String,
    pub offset: usize,
    pub severity: Severity,
}

impl SyntaxDiagnostic {
    pub fn fatal(message: impl Into<String>, offset: usize) -> Self {
        SyntaxDiagnostic {
            message: message.into(),
            offset,
            severity: Severity::Fatal,
        }
    }

    pub fn warning(message: impl Into<String>, offset: usize) -> Self {
        SyntaxDiagnostic {
            message: message.into(),
            offset,
            severity: Severity::Warning,
        }
    }

    pub fn is_fatal(&self) -> bool {
        self.severity == Severity::Fatal
    }
}

fn closing_for(open: &str) -> Option<&'static str> {
    match open {
        "(" => Some(")"),
        "[" => Some("]"),
        "{" => Some("}"),
        _ => None,
    }
}

fn is_closer(text: &str) -> bool {
    matches!(text, ")" | "]" | "}")
}

/// Checks `()`, `[]` and `{}` nesting over significant tokens and reports the
/// first problem found.
pub(crate) fn delimiter_diagnostics(tokens: &[&Token]) -> Vec<SyntaxDiagnostic> {
    let mut stack: Vec<&Token> = Vec::new();
    for tok in tokens {
        if !matches!(
            tok.kind,
            TokenKind::Punctuation | TokenKind::AttributeBracket
        ) {
            continue;
        }
        if closing_for(&tok.text).is_some() {
            stack.push(tok);
        } else if is_closer(&tok.text) {
            match stack.pop() {
                Some(open) if closing_for(&open.text) == Some(tok.text.as_str()) => {}
                Some(open) => {
                    return vec![SyntaxDiagnostic::fatal(
                        format!("mismatched '{}' closes '{}'", tok.text, open.text),
                        tok.byte_offset,
                    )]
                }
                None => {
                    return vec![SyntaxDiagnostic::fatal(
                        format!("unbalanced '{}'", tok.text),
                        tok.byte_offset,
                    )]
                }
            }
        }
    }
    stack
        .last()
        .map(|open| {
            vec![SyntaxDiagnostic::fatal(
                format!("unclosed '{}'", open.text),
                open.byte_offset,
            )]
        })
        .unwrap_or_default()
}

/// Index of the delimiter matching the opener at `open`, scanning forward
/// over significant tokens.
pub(crate) fn matching_close(tokens: &[&Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, tok) in tokens.iter().enumerate().skip(open) {
        if !matches!(
            tok.kind,
            TokenKind::Punctuation | TokenKind::AttributeBracket
        ) {
            continue;
        }
        if closing_for(&tok.text).is_some() {
            depth += 1;
        } else if is_closer(&tok.text) {
            depth = depth.checked_sub(1)?;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Index of the opener matching the closer at `close`, scanning backward.
pub(crate) fn matching_open(tokens: &[&Token], close: usize) -> Option<usize> {
    let mut depth = 0usize;
    for i in (0..=close).rev() {
        let tok = tokens[i];
        if !matches!(
            tok.kind,
            TokenKind::Punctuation | TokenKind::AttributeBracket
        ) {
            continue;
        }
        if is_closer(&tok.text) {
            depth += 1;
        } else if closing_for(&tok.text).is_some() {
            depth = depth.checked_sub(1)?;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Token texts joined by single spaces; used as the whitespace-normalized
/// form of a statement.
pub(crate) fn normalized_text(tokens: &[&Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}
