//! Lossless lexer for the subset of C# that shows up in unit tests and the
//! files they exercise.
//!
//! Every byte of the input ends up in exactly one token, so concatenating the
//! token texts gives back the source. Malformed input never aborts lexing:
//! unterminated literals and comments become a single [`TokenKind::Error`]
//! token that runs to the end of the input (a regular string stops at the
//! newline instead), and stray characters become one-character error tokens.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuation,
    StringLiteral,
    CharLiteral,
    Number,
    CommentLine,
    CommentBlock,
    /// `[` or `]` delimiting an attribute section at the start of a line.
    AttributeBracket,
    /// A `#if`/`#region`/... line. Kept as one token and ignored by the parsers.
    Preprocessor,
    Whitespace,
    Error,
}

impl TokenKind {
    /// Whitespace, comments and preprocessor lines.
    pub fn is_trivia(self) -> bool {
        matches!(
            self,
            TokenKind::Whitespace
                | TokenKind::CommentLine
                | TokenKind::CommentBlock
                | TokenKind::Preprocessor
        )
    }

    pub fn is_comment(self) -> bool {
        matches!(self, TokenKind::CommentLine | TokenKind::CommentBlock)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub byte_offset: usize,
}

impl Token {
    pub fn end(&self) -> usize {
        self.byte_offset + self.text.len()
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        (self.kind == TokenKind::Punctuation || self.kind == TokenKind::AttributeBracket)
            && self.text == text
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "as",
    "base",
    "bool",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "checked",
    "class",
    "const",
    "continue",
    "decimal",
    "default",
    "delegate",
    "do",
    "double",
    "else",
    "enum",
    "event",
    "explicit",
    "extern",
    "false",
    "finally",
    "fixed",
    "float",
    "for",
    "foreach",
    "goto",
    "if",
    "implicit",
    "in",
    "int",
    "interface",
    "internal",
    "is",
    "lock",
    "long",
    "namespace",
    "new",
    "null",
    "object",
    "operator",
    "out",
    "override",
    "params",
    "private",
    "protected",
    "public",
    "readonly",
    "ref",
    "return",
    "sbyte",
    "sealed",
    "short",
    "sizeof",
    "stackalloc",
    "static",
    "string",
    "struct",
    "switch",
    "this",
    "throw",
    "true",
    "try",
    "typeof",
    "uint",
    "ulong",
    "unchecked",
    "unsafe",
    "ushort",
    "using",
    "virtual",
    "void",
    "volatile",
    "while",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

// Longest match first within each length class.
const PUNCT3: &[&str] = &["<<=", "??=", "..."];
const PUNCT2: &[&str] = &[
    "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", "<<", "??", "?.", "::", "->", "..",
];
const PUNCT1: &str = "{}()[];,.:?+-*/%&|^!~=<>";

/// Splits `source` into a lossless token stream.
pub fn tokenize(source: &str) -> Vec<Token> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    tokens: Vec<Token>,
    /// Bracket depth inside an attribute section, if one is open.
    attribute_depth: Option<usize>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            tokens: Vec::new(),
            attribute_depth: None,
        }
    }

    fn run(mut self) -> Vec<Token> {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let kind = self.next_kind();
            debug_assert!(self.pos > start, "lexer made no progress at {start}");
            self.tokens.push(Token {
                kind,
                text: self.src[start..self.pos].to_string(),
                byte_offset: start,
            });
        }
        self.tokens
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn current_char(&self) -> char {
        self.src[self.pos..].chars().next().unwrap_or('\0')
    }

    fn next_kind(&mut self) -> TokenKind {
        let b = self.bytes[self.pos];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                while matches!(self.peek(0), Some(b' ' | b'\t' | b'\r' | b'\n')) {
                    self.pos += 1;
                }
                TokenKind::Whitespace
            }
            b'/' if self.peek(1) == Some(b'/') => {
                self.skip_to_eol();
                TokenKind::CommentLine
            }
            b'/' if self.peek(1) == Some(b'*') => match self.src[self.pos + 2..].find("*/") {
                Some(i) => {
                    self.pos += 2 + i + 2;
                    TokenKind::CommentBlock
                }
                None => {
                    self.pos = self.bytes.len();
                    TokenKind::Error
                }
            },
            b'#' if self.at_line_start() => {
                self.skip_to_eol();
                TokenKind::Preprocessor
            }
            b'"' | b'@' | b'$' => match scan_string(self.bytes, self.pos) {
                Scan::Done(end) => {
                    self.pos = end;
                    TokenKind::StringLiteral
                }
                Scan::BrokenAt(end) => {
                    self.pos = end;
                    TokenKind::Error
                }
                Scan::Unterminated => {
                    self.pos = self.bytes.len();
                    TokenKind::Error
                }
                Scan::NotString => {
                    if b == b'@'
                        && self.src[self.pos + 1..]
                            .chars()
                            .next()
                            .is_some_and(is_ident_start_char)
                    {
                        // verbatim identifier, e.g. @class
                        self.pos += 1;
                        self.lex_word();
                        TokenKind::Identifier
                    } else {
                        self.pos += 1;
                        TokenKind::Error
                    }
                }
            },
            b'\'' => match scan_char(self.bytes, self.pos) {
                Some(end) => {
                    self.pos = end;
                    TokenKind::CharLiteral
                }
                None => {
                    self.pos = self.bytes.len();
                    TokenKind::Error
                }
            },
            b'0'..=b'9' => {
                self.lex_number();
                TokenKind::Number
            }
            b'.' if self.peek(1).is_some_and(|c| c.is_ascii_digit()) => {
                self.lex_number();
                TokenKind::Number
            }
            _ if is_ident_start_char(self.current_char()) => {
                let word = self.lex_word();
                if is_keyword(word) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                }
            }
            _ => self.lex_punct(),
        }
    }

    fn at_line_start(&self) -> bool {
        self.src[..self.pos]
            .bytes()
            .rev()
            .take_while(|&c| c != b'\n')
            .all(|c| c == b' ' || c == b'\t')
    }

    fn skip_to_eol(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == b'\n' {
                break;
            }
            self.pos += 1;
        }
    }

    fn lex_word(&mut self) -> &'a str {
        let start = self.pos;
        for (i, c) in self.src[start..].char_indices() {
            if !is_ident_continue_char(c) {
                self.pos = start + i;
                return &self.src[start..self.pos];
            }
        }
        self.pos = self.bytes.len();
        &self.src[start..]
    }

    fn lex_number(&mut self) {
        if self.peek(0) == Some(b'0') && matches!(self.peek(1), Some(b'x' | b'X' | b'b' | b'B')) {
            self.pos += 2;
            while self
                .peek(0)
                .is_some_and(|c| c.is_ascii_hexdigit() || c == b'_')
            {
                self.pos += 1;
            }
        } else {
            self.digits();
            if self.peek(0) == Some(b'.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
                self.digits();
            }
            if matches!(self.peek(0), Some(b'e' | b'E')) {
                let sign = usize::from(matches!(self.peek(1), Some(b'+' | b'-')));
                if self.peek(1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1 + sign;
                    self.digits();
                }
            }
        }
        while matches!(
            self.peek(0),
            Some(b'u' | b'U' | b'l' | b'L' | b'f' | b'F' | b'd' | b'D' | b'm' | b'M')
        ) {
            self.pos += 1;
        }
    }

    fn digits(&mut self) {
        while self
            .peek(0)
            .is_some_and(|c| c.is_ascii_digit() || c == b'_')
        {
            self.pos += 1;
        }
    }

    fn lex_punct(&mut self) -> TokenKind {
        let rest = &self.src[self.pos..];
        for table in [PUNCT3, PUNCT2] {
            if let Some(p) = table.iter().find(|p| rest.starts_with(**p)) {
                self.pos += p.len();
                return TokenKind::Punctuation;
            }
        }
        let c = self.current_char();
        self.pos += c.len_utf8();
        if !PUNCT1.contains(c) {
            return TokenKind::Error;
        }
        match c {
            '[' => {
                if let Some(depth) = self.attribute_depth.as_mut() {
                    *depth += 1;
                    return TokenKind::Punctuation;
                }
                if self.opens_attribute() {
                    self.attribute_depth = Some(0);
                    return TokenKind::AttributeBracket;
                }
                TokenKind::Punctuation
            }
            ']' => match self.attribute_depth {
                Some(0) => {
                    self.attribute_depth = None;
                    TokenKind::AttributeBracket
                }
                Some(ref mut depth) => {
                    *depth -= 1;
                    TokenKind::Punctuation
                }
                None => TokenKind::Punctuation,
            },
            _ => TokenKind::Punctuation,
        }
    }

    /// `[` that is the first thing on its line (or follows another attribute
    /// section) and is followed by an identifier.
    fn opens_attribute(&self) -> bool {
        let bracket = self.pos - 1;
        let before_ok = {
            let prev_significant = self
                .tokens
                .iter()
                .rev()
                .find(|t| t.kind != TokenKind::Whitespace);
            let line_start = self.src[..bracket]
                .bytes()
                .rev()
                .take_while(|&c| c != b'\n')
                .all(|c| c == b' ' || c == b'\t');
            line_start
                || prev_significant.is_none()
                || prev_significant.is_some_and(|t| t.kind == TokenKind::AttributeBracket)
        };
        let after = self.src[self.pos..].trim_start();
        before_ok && after.chars().next().is_some_and(is_ident_start_char)
    }
}

fn is_ident_start_char(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

enum Scan {
    Done(usize),
    /// Regular string broken by a newline; ends before the newline.
    BrokenAt(usize),
    Unterminated,
    NotString,
}

/// Scans any string literal form starting at `start`: regular, verbatim
/// (`@"..."`), interpolated (`$"..."`, `$@"..."`, `@$"..."`) and raw
/// (`"""..."""`, optionally with `$` prefixes).
fn scan_string(bytes: &[u8], start: usize) -> Scan {
    let mut i = start;
    let mut dollars = 0usize;
    let mut verbatim = false;
    loop {
        match bytes.get(i) {
            Some(b'$') => dollars += 1,
            Some(b'@') if !verbatim => verbatim = true,
            _ => break,
        }
        i += 1;
    }
    if bytes.get(i) != Some(&b'"') {
        return Scan::NotString;
    }
    let interpolated = dollars > 0;
    if !verbatim {
        let quotes = bytes[i..].iter().take_while(|&&c| c == b'"').count();
        if quotes >= 3 {
            return scan_raw(bytes, i, quotes, dollars);
        }
    }
    i += 1;
    while let Some(&c) = bytes.get(i) {
        match c {
            b'"' if verbatim && bytes.get(i + 1) == Some(&b'"') => i += 2,
            b'"' => return Scan::Done(i + 1),
            b'\\' if !verbatim => i += 2,
            b'\n' if !verbatim => return Scan::BrokenAt(i),
            b'{' if interpolated && bytes.get(i + 1) == Some(&b'{') => i += 2,
            b'{' if interpolated => match scan_hole(bytes, i + 1) {
                Some(end) => i = end,
                None => return Scan::Unterminated,
            },
            _ => i += 1,
        }
    }
    Scan::Unterminated
}

fn scan_raw(bytes: &[u8], open: usize, quotes: usize, dollars: usize) -> Scan {
    let mut i = open + quotes;
    while i < bytes.len() {
        if bytes[i] == b'"' {
            let run = bytes[i..].iter().take_while(|&&c| c == b'"').count();
            if run >= quotes {
                return Scan::Done(i + run);
            }
            i += run;
        } else if dollars > 0 && bytes[i] == b'{' {
            let run = bytes[i..].iter().take_while(|&&c| c == b'{').count();
            if run >= dollars {
                match scan_hole(bytes, i + run) {
                    Some(end) => {
                        // holes opened with n braces close with n braces
                        let extra = bytes[end..].iter().take_while(|&&c| c == b'}').count();
                        i = end + extra.min(dollars.saturating_sub(1));
                    }
                    None => return Scan::Unterminated,
                }
            } else {
                i += run;
            }
        } else {
            i += 1;
        }
    }
    Scan::Unterminated
}

/// Skips an interpolation hole body; returns the offset just past its `}`.
fn scan_hole(bytes: &[u8], mut i: usize) -> Option<usize> {
    let mut depth = 0usize;
    while let Some(&c) = bytes.get(i) {
        match c {
            b'{' => {
                depth += 1;
                i += 1;
            }
            b'}' if depth == 0 => return Some(i + 1),
            b'}' => {
                depth -= 1;
                i += 1;
            }
            b'"' | b'@' | b'$' => match scan_string(bytes, i) {
                Scan::Done(end) => i = end,
                Scan::Unterminated | Scan::BrokenAt(_) => return None,
                Scan::NotString => i += 1,
            },
            b'\'' => i = scan_char(bytes, i)?,
            _ => i += 1,
        }
    }
    None
}

fn scan_char(bytes: &[u8], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while let Some(&c) = bytes.get(i) {
        match c {
            b'\\' => i += 2,
            b'\'' => return Some(i + 1),
            b'\n' => return None,
            _ => i += 1,
        }
    }
    None
}
