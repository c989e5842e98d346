//! Recursive-descent parser for a single test method.
//!
//! The parser always produces a tree. Problems are recorded as diagnostics;
//! when any of them is fatal the statement list is moved to
//! [`TestSyntaxTree::recovered_body`] and [`TestSyntaxTree::body`] is `None`.
//! End of input closes every open construct during recovery, so truncated
//! completions still yield the statements that were generated.

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    delimiter_diagnostics, matching_close, matching_open, normalized_text, Span, SyntaxDiagnostic,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    /// Attribute name as written, e.g. `TestMethod` or `DataRow`.
    pub name: String,
    /// Full attribute text including arguments.
    pub text: String,
}

impl Attribute {
    pub fn is_test_method(&self) -> bool {
        let name = self.name.rsplit('.').next().unwrap_or(&self.name);
        name == "TestMethod" || name == "TestMethodAttribute"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub text: String,
    pub span: Span,
}

/// A call site. `callee` is the member-access chain leading to the invoked
/// name, e.g. `["command", "Stop", "Wait"]` for `command.Stop().Wait()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub callee: Vec<String>,
    pub is_constructor: bool,
    pub offset: usize,
}

impl Invocation {
    pub fn name(&self) -> &str {
        self.callee.last().map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Expr {
    pub text: String,
    pub span: Span,
    pub invocations: Vec<Invocation>,
    /// Contains a ternary `?:` or a `switch` expression.
    pub has_conditional: bool,
    /// Statement bodies of lambdas (`=> { ... }`) and anonymous delegates.
    pub lambda_bodies: Vec<Vec<Statement>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalDeclaration {
    pub type_name: String,
    /// Declarators and initializers, everything after the type.
    pub declarators: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSection {
    pub labels: Vec<String>,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatchClause {
    pub declaration: Option<String>,
    pub filter: Option<Expr>,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StatementKind {
    Expression {
        expr: Expr,
    },
    LocalDeclaration {
        decl: LocalDeclaration,
    },
    If {
        condition: Expr,
        then_branch: Box<Statement>,
        else_branch: Option<Box<Statement>>,
    },
    Switch {
        subject: Expr,
        sections: Vec<SwitchSection>,
    },
    While {
        condition: Expr,
        body: Box<Statement>,
    },
    Do {
        body: Box<Statement>,
        condition: Expr,
    },
    For {
        header: Expr,
        body: Box<Statement>,
    },
    Foreach {
        header: Expr,
        body: Box<Statement>,
    },
    Try {
        body: Vec<Statement>,
        catches: Vec<CatchClause>,
        finally: Option<Vec<Statement>>,
    },
    Using {
        resource: Expr,
        body: Option<Box<Statement>>,
    },
    Return {
        value: Option<Expr>,
    },
    Throw {
        value: Option<Expr>,
    },
    Block {
        statements: Vec<Statement>,
    },
    /// Anything outside the recognized subset (`lock`, `unsafe`, labels,
    /// `yield`, ...). Nested statements and expressions are still exposed.
    Unknown {
        exprs: Vec<Expr>,
        children: Vec<Statement>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    #[serde(flatten)]
    pub kind: StatementKind,
    pub span: Span,
    /// Whitespace-normalized source text.
    pub text: String,
}

impl Statement {
    /// Expressions owned directly by this statement.
    pub fn exprs(&self) -> Vec<&Expr> {
        use StatementKind::*;
        match &self.kind {
            Expression { expr } => vec![expr],
            LocalDeclaration { decl } => vec![&decl.declarators],
            If { condition, .. } | While { condition, .. } | Do { condition, .. } => {
                vec![condition]
            }
            Switch { subject, .. } => vec![subject],
            For { header, .. } | Foreach { header, .. } => vec![header],
            Try { catches, .. } => catches.iter().filter_map(|c| c.filter.as_ref()).collect(),
            Using { resource, .. } => vec![resource],
            Return { value } | Throw { value } => value.iter().collect(),
            Block { .. } => Vec::new(),
            Unknown { exprs, .. } => exprs.iter().collect(),
        }
    }

    /// Statement sequences nested in this statement, including lambda bodies.
    /// Single embedded statements (e.g. an unbraced `if` branch) are returned
    /// as one-element slices.
    pub fn child_lists(&self) -> Vec<&[Statement]> {
        use StatementKind::*;
        let mut out: Vec<&[Statement]> = Vec::new();
        match &self.kind {
            If {
                then_branch,
                else_branch,
                ..
            } => {
                out.push(std::slice::from_ref(then_branch.as_ref()));
                if let Some(e) = else_branch {
                    out.push(std::slice::from_ref(e.as_ref()));
                }
            }
            Switch { sections, .. } => out.extend(sections.iter().map(|s| s.body.as_slice())),
            While { body, .. } | Do { body, .. } | For { body, .. } | Foreach { body, .. } => {
                out.push(std::slice::from_ref(body.as_ref()))
            }
            Try {
                body,
                catches,
                finally,
                ..
            } => {
                out.push(body);
                out.extend(catches.iter().map(|c| c.body.as_slice()));
                if let Some(f) = finally {
                    out.push(f);
                }
            }
            Using { body: Some(b), .. } => out.push(std::slice::from_ref(b.as_ref())),
            Block { statements } => out.push(statements),
            Unknown { children, .. } => out.push(children),
            _ => {}
        }
        for expr in self.exprs() {
            out.extend(expr.lambda_bodies.iter().map(Vec::as_slice));
        }
        out
    }

    /// Pre-order visit of this statement and everything nested in it.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Statement)) {
        f(self);
        for list in self.child_lists() {
            for s in list {
                s.walk(f);
            }
        }
    }

    pub fn is_control_flow(&self) -> bool {
        use StatementKind::*;
        matches!(
            self.kind,
            If { .. }
                | Switch { .. }
                | While { .. }
                | Do { .. }
                | For { .. }
                | Foreach { .. }
                | Try { .. }
        )
    }
}

/// Parse result for one test method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSyntaxTree {
    pub attributes: Vec<Attribute>,
    pub modifiers: Vec<String>,
    pub return_type: String,
    pub method_name: String,
    pub parameters: Vec<String>,
    /// Present iff there are no fatal diagnostics.
    pub body: Option<Vec<Statement>>,
    /// Best-effort statements when the method did not parse cleanly.
    pub recovered_body: Vec<Statement>,
    /// Comments inside the method span.
    pub comments: Vec<Comment>,
    pub span: Span,
    pub diagnostics: Vec<SyntaxDiagnostic>,
}

impl TestSyntaxTree {
    pub fn has_fatal(&self) -> bool {
        self.diagnostics.iter().any(SyntaxDiagnostic::is_fatal)
    }

    /// The parsed body, or the recovered statements when parsing failed.
    pub fn statements(&self) -> &[Statement] {
        self.body.as_deref().unwrap_or(&self.recovered_body)
    }

    /// Visits every statement at every nesting depth.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&'a Statement)) {
        for s in self.statements() {
            s.walk(&mut f);
        }
    }

    /// Every statement sequence in the method: the body itself plus all
    /// nested lists, in pre-order.
    pub fn statement_lists(&self) -> Vec<&[Statement]> {
        let mut lists = vec![self.statements()];
        self.walk(|s| lists.extend(s.child_lists()));
        lists
    }

    pub fn invocations(&self) -> Vec<&Invocation> {
        let mut out = Vec::new();
        self.walk(|s| {
            for e in s.exprs() {
                out.extend(e.invocations.iter());
            }
        });
        out
    }

    pub fn is_test_method(&self) -> bool {
        self.attributes.iter().any(Attribute::is_test_method)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxVerdict {
    pub correct: bool,
    pub diagnostics: Vec<SyntaxDiagnostic>,
}

/// Syntax check relative to the supported subset grammar. Lexical errors are
/// always fatal; unknown-but-balanced statements are accepted.
pub fn check_syntax(source: &str) -> SyntaxVerdict {
    let tree = parse_test_method(source);
    SyntaxVerdict {
        correct: !tree.has_fatal(),
        diagnostics: tree.diagnostics,
    }
}

pub fn parse_test_method(source: &str) -> TestSyntaxTree {
    let tokens = tokenize(source);
    let significant: Vec<&Token> = tokens.iter().filter(|t| !t.kind.is_trivia()).collect();
    let mut parser = Parser {
        toks: &significant,
        pos: 0,
        diags: Vec::new(),
        eof: source.len(),
    };
    for tok in tokens.iter().filter(|t| t.kind == TokenKind::Error) {
        parser.diags.push(SyntaxDiagnostic::fatal(
            format!("invalid token {:?}", truncate_for_message(&tok.text)),
            tok.byte_offset,
        ));
    }
    parser.diags.extend(delimiter_diagnostics(&significant));

    let mut tree = parser.method();
    let span = tree.span;
    tree.comments = tokens
        .iter()
        .filter(|t| t.kind.is_comment() && span.contains(t.byte_offset))
        .map(|t| Comment {
            text: t.text.clone(),
            span: Span::new(t.byte_offset, t.end()),
        })
        .collect();
    tree.diagnostics = dedup_diagnostics(parser.diags);
    if tree.has_fatal() {
        tree.recovered_body = tree.body.take().unwrap_or_default();
    }
    tree
}

fn truncate_for_message(text: &str) -> String {
    let mut s: String = text.chars().take(20).collect();
    if s.len() < text.len() {
        s.push_str("...");
    }
    s
}

fn dedup_diagnostics(mut diags: Vec<SyntaxDiagnostic>) -> Vec<SyntaxDiagnostic> {
    diags.sort_by_key(|d| d.offset);
    diags.dedup();
    diags
}

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "internal",
    "static",
    "async",
    "virtual",
    "override",
    "sealed",
    "abstract",
    "extern",
    "unsafe",
    "new",
    "partial",
    "readonly",
];

const BUILTIN_TYPES: &[&str] = &[
    "bool", "byte", "char", "decimal", "double", "float", "int", "long", "object", "sbyte",
    "short", "string", "uint", "ulong", "ushort", "void", "dynamic",
];

struct Parser<'t> {
    toks: &'t [&'t Token],
    pos: usize,
    diags: Vec<SyntaxDiagnostic>,
    eof: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + ahead).copied()
    }

    fn at_punct(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(text))
    }

    fn at_keyword(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(text))
    }

    /// Contextual keywords (`await`, `var`, `when`, ...) lex as identifiers.
    fn at_word(&self, text: &str) -> bool {
        self.peek()
            .is_some_and(|t| t.text == text && t.kind != TokenKind::StringLiteral)
    }

    fn offset(&self) -> usize {
        self.peek().map(|t| t.byte_offset).unwrap_or(self.eof)
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            self.toks.first().map(|t| t.byte_offset).unwrap_or(0)
        } else {
            self.toks[self.pos - 1].end()
        }
    }

    fn fatal(&mut self, message: impl Into<String>) {
        let offset = self.offset();
        self.diags.push(SyntaxDiagnostic::fatal(message, offset));
    }

    fn expect_punct(&mut self, text: &str) -> bool {
        if self.at_punct(text) {
            self.pos += 1;
            true
        } else {
            let found = self
                .peek()
                .map(|t| format!("'{}'", t.text))
                .unwrap_or_else(|| "end of input".to_string());
            self.fatal(format!("expected '{text}', found {found}"));
            false
        }
    }

    fn method(&mut self) -> TestSyntaxTree {
        let start = self.offset();
        let attributes = self.attributes();
        let mut modifiers = Vec::new();
        while let Some(tok) = self.peek() {
            let is_modifier = MODIFIERS.contains(&tok.text.as_str())
                && matches!(tok.kind, TokenKind::Keyword | TokenKind::Identifier)
                // `async` etc. followed by `(` or `=` would be a name, not a modifier
                && self.peek_at(1).is_some_and(|n| {
                    matches!(n.kind, TokenKind::Keyword | TokenKind::Identifier)
                });
            if !is_modifier {
                break;
            }
            modifiers.push(tok.text.clone());
            self.pos += 1;
        }

        let mut tree = TestSyntaxTree {
            attributes,
            modifiers,
            return_type: String::new(),
            method_name: String::new(),
            parameters: Vec::new(),
            body: None,
            recovered_body: Vec::new(),
            comments: Vec::new(),
            span: Span::new(start, self.eof),
            diagnostics: Vec::new(),
        };

        if self.peek().is_none() {
            self.fatal("expected method declaration");
            return tree;
        }

        let type_start = self.pos;
        if self.skip_type() {
            tree.return_type = normalized_text(&self.toks[type_start..self.pos]);
        } else {
            self.fatal("expected return type");
            tree.method_name = self.recover_name();
            return tree;
        }

        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                tree.method_name = t.text.clone();
                self.pos += 1;
            }
            _ => {
                self.fatal("expected method name");
                self.pos = type_start;
                tree.method_name = self.recover_name();
                return tree;
            }
        }

        if self.at_punct("<") {
            let save = self.pos;
            if !self.skip_generic_args() {
                self.pos = save;
                self.fatal("malformed type parameter list");
                return tree;
            }
        }

        if !self.at_punct("(") {
            self.fatal("expected '(' after method name");
            return tree;
        }
        let open = self.pos;
        match matching_close(self.toks, open) {
            Some(close) => {
                tree.parameters = split_top_level(&self.toks[open + 1..close], ",")
                    .into_iter()
                    .filter(|p| !p.is_empty())
                    .map(normalized_text)
                    .collect();
                self.pos = close + 1;
            }
            None => {
                self.fatal("unterminated parameter list");
                return tree;
            }
        }

        // generic constraints
        if self.at_word("where") {
            while self.peek().is_some() && !self.at_punct("{") && !self.at_punct("=>") {
                self.pos += 1;
            }
        }

        let body = if self.at_punct("{") {
            self.block()
        } else if self.at_punct("=>") {
            let arrow = self.pos;
            self.pos += 1;
            let stmt = self.expression_statement(arrow + 1);
            vec![stmt]
        } else {
            self.fatal("expected method body");
            return tree;
        };
        tree.body = Some(body);
        tree.span = Span::new(start, self.prev_end());

        if let Some(extra) = self.peek() {
            self.diags.push(SyntaxDiagnostic::fatal(
                format!("unexpected '{}' after method body", extra.text),
                extra.byte_offset,
            ));
        }
        tree
    }

    fn recover_name(&self) -> String {
        let paren = self.toks.iter().position(|t| t.is_punct("("));
        let head = &self.toks[..paren.unwrap_or(self.toks.len())];
        head.iter()
            .rev()
            .find(|t| t.kind == TokenKind::Identifier)
            .map(|t| t.text.clone())
            .unwrap_or_default()
    }

    fn attributes(&mut self) -> Vec<Attribute> {
        let mut out = Vec::new();
        while self.at_punct("[") {
            let open = self.pos;
            let Some(close) = matching_close(self.toks, open) else {
                self.fatal("unterminated attribute");
                self.pos = self.toks.len();
                return out;
            };
            let inner = &self.toks[open + 1..close];
            // optional target, e.g. [return: NotNull]
            let inner = match inner {
                [t, colon, rest @ ..]
                    if colon.is_punct(":")
                        && matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) =>
                {
                    rest
                }
                _ => inner,
            };
            for part in split_top_level(inner, ",") {
                let name_len = part
                    .iter()
                    .position(|t| !(t.kind == TokenKind::Identifier || t.is_punct(".")))
                    .unwrap_or(part.len());
                let name: String = part[..name_len].iter().map(|t| t.text.as_str()).collect();
                if name.is_empty() {
                    self.diags.push(SyntaxDiagnostic::fatal(
                        "malformed attribute",
                        self.toks[open].byte_offset,
                    ));
                    continue;
                }
                out.push(Attribute {
                    name,
                    text: normalized_text(part),
                });
            }
            self.pos = close + 1;
        }
        out
    }

    /// Skips a type: qualified name with generic arguments, tuple types,
    /// and `?`/`[]`/`*` suffixes.
    fn skip_type(&mut self) -> bool {
        let Some(tok) = self.peek() else {
            return false;
        };
        if tok.is_punct("(") {
            let Some(close) = matching_close(self.toks, self.pos) else {
                return false;
            };
            let inner = &self.toks[self.pos + 1..close];
            // a tuple type needs at least one comma and no statement punctuation
            if !inner.iter().any(|t| t.is_punct(","))
                || inner.iter().any(|t| t.is_punct(";") || t.is_punct("{"))
            {
                return false;
            }
            self.pos = close + 1;
        } else if tok.kind == TokenKind::Identifier
            || (tok.kind == TokenKind::Keyword && BUILTIN_TYPES.contains(&tok.text.as_str()))
        {
            self.pos += 1;
            loop {
                if self.at_punct("<") {
                    let save = self.pos;
                    if !self.skip_generic_args() {
                        self.pos = save;
                        break;
                    }
                }
                if (self.at_punct(".") || self.at_punct("::"))
                    && self
                        .peek_at(1)
                        .is_some_and(|t| t.kind == TokenKind::Identifier)
                {
                    self.pos += 2;
                    continue;
                }
                break;
            }
        } else {
            return false;
        }
        loop {
            if self.at_punct("?") || self.at_punct("*") {
                self.pos += 1;
            } else if self.at_punct("[")
                && (1..)
                    .map(|k| self.peek_at(k))
                    .take_while(|t| t.is_some_and(|t| t.is_punct(",")))
                    .count()
                    .checked_add(1)
                    .and_then(|k| self.peek_at(k))
                    .is_some_and(|t| t.is_punct("]"))
            {
                let close = matching_close(self.toks, self.pos).unwrap_or(self.pos);
                self.pos = close + 1;
            } else {
                break;
            }
        }
        true
    }

    /// Skips `<...>` when its contents look like type arguments.
    fn skip_generic_args(&mut self) -> bool {
        debug_assert!(self.at_punct("<"));
        let mut depth = 0usize;
        let mut i = self.pos;
        while let Some(tok) = self.toks.get(i) {
            let ok = match tok.text.as_str() {
                "<" => {
                    depth += 1;
                    true
                }
                ">" => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos = i + 1;
                        return true;
                    }
                    true
                }
                "." | "," | "?" | "[" | "]" | "(" | ")" | "::" => true,
                _ => {
                    tok.kind == TokenKind::Identifier
                        || (tok.kind == TokenKind::Keyword
                            && BUILTIN_TYPES.contains(&tok.text.as_str()))
                }
            };
            if !ok {
                return false;
            }
            i += 1;
        }
        false
    }

    /// Parses `{ statements }`. The opening brace must be current.
    fn block(&mut self) -> Vec<Statement> {
        debug_assert!(self.at_punct("{"));
        self.pos += 1;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                None => {
                    self.fatal("expected '}' before end of input");
                    return stmts;
                }
                Some(t) if t.is_punct("}") => {
                    self.pos += 1;
                    return stmts;
                }
                Some(_) => stmts.push(self.statement()),
            }
        }
    }

    fn block_statement(&mut self) -> Vec<Statement> {
        if self.at_punct("{") {
            self.block()
        } else {
            self.fatal("expected '{'");
            Vec::new()
        }
    }

    /// Parses one statement. Must be called with a token available; always
    /// consumes at least one token.
    fn statement(&mut self) -> Statement {
        let start_pos = self.pos;
        let start = self.offset();
        let kind = self.statement_kind();
        if self.pos == start_pos {
            // never stall on a token the grammar has no place for
            self.pos += 1;
        }
        let end = self.prev_end().max(start);
        Statement {
            kind,
            span: Span::new(start, end),
            text: normalized_text(&self.toks[start_pos..self.pos]),
        }
    }

    fn embedded_statement(&mut self, owner: &str) -> Box<Statement> {
        if self.peek().is_none() || self.at_punct("}") {
            self.fatal(format!("expected statement after '{owner}'"));
            let at = self.prev_end();
            return Box::new(Statement {
                kind: StatementKind::Block {
                    statements: Vec::new(),
                },
                span: Span::new(at, at),
                text: String::new(),
            });
        }
        Box::new(self.statement())
    }

    fn statement_kind(&mut self) -> StatementKind {
        let tok = self.peek().expect("statement() requires a token");
        if tok.is_punct("{") {
            return StatementKind::Block {
                statements: self.block(),
            };
        }
        if tok.is_punct(";") {
            self.pos += 1;
            return unknown(Vec::new(), Vec::new());
        }
        if tok.is_punct("}") {
            self.fatal("unexpected '}'");
            return unknown(Vec::new(), Vec::new());
        }
        if tok.kind == TokenKind::Keyword {
            match tok.text.as_str() {
                "if" => return self.if_statement(),
                "switch" if self.peek_at(1).is_some_and(|t| t.is_punct("(")) => {
                    return self.switch_statement()
                }
                "while" => {
                    self.pos += 1;
                    let condition = self.paren_expr("while");
                    let body = self.embedded_statement("while");
                    return StatementKind::While { condition, body };
                }
                "do" => {
                    self.pos += 1;
                    let body = self.embedded_statement("do");
                    let condition = if self.at_keyword("while") {
                        self.pos += 1;
                        let c = self.paren_expr("while");
                        self.expect_punct(";");
                        c
                    } else {
                        self.fatal("expected 'while' after do-body");
                        Expr::default()
                    };
                    return StatementKind::Do { body, condition };
                }
                "for" => {
                    self.pos += 1;
                    let header = self.paren_expr("for");
                    let body = self.embedded_statement("for");
                    return StatementKind::For { header, body };
                }
                "foreach" => return self.foreach_statement(),
                "try" => return self.try_statement(),
                "using" if self.peek_at(1).is_some_and(|t| t.is_punct("(")) => {
                    self.pos += 1;
                    let resource = self.paren_expr("using");
                    let body = Some(self.embedded_statement("using"));
                    return StatementKind::Using { resource, body };
                }
                "using" => {
                    self.pos += 1;
                    let start = self.pos;
                    let resource = self.expression_statement_expr(start);
                    return StatementKind::Using {
                        resource,
                        body: None,
                    };
                }
                "return" | "throw" => {
                    let is_return = tok.text == "return";
                    self.pos += 1;
                    let value = if self.at_punct(";") {
                        self.pos += 1;
                        None
                    } else {
                        let start = self.pos;
                        Some(self.expression_statement_expr(start))
                    };
                    return if is_return {
                        StatementKind::Return { value }
                    } else {
                        StatementKind::Throw { value }
                    };
                }
                "break" | "continue" | "goto" => {
                    self.pos += 1;
                    let start = self.pos;
                    let e = self.expression_statement_expr(start);
                    return unknown(vec![e], Vec::new());
                }
                "lock" | "fixed" => {
                    let owner = tok.text.clone();
                    self.pos += 1;
                    let e = self.paren_expr(&owner);
                    let body = self.embedded_statement(&owner);
                    return unknown(vec![e], vec![*body]);
                }
                "checked" | "unchecked" | "unsafe"
                    if self.peek_at(1).is_some_and(|t| t.is_punct("{")) =>
                {
                    self.pos += 1;
                    let children = self.block();
                    return unknown(Vec::new(), children);
                }
                "else" | "catch" | "finally" | "case" | "default" => {
                    let text = tok.text.clone();
                    self.fatal(format!("unexpected '{text}'"));
                    self.pos += 1;
                    return unknown(Vec::new(), Vec::new());
                }
                _ => {}
            }
        }
        if tok.kind == TokenKind::Identifier {
            match tok.text.as_str() {
                "await" if self.peek_at(1).is_some_and(|t| t.is_keyword("foreach")) => {
                    self.pos += 1;
                    return self.foreach_statement();
                }
                "await" if self.peek_at(1).is_some_and(|t| t.is_keyword("using")) => {
                    self.pos += 1;
                    return self.statement_kind();
                }
                "yield"
                    if self
                        .peek_at(1)
                        .is_some_and(|t| t.is_keyword("return") || t.is_keyword("break")) =>
                {
                    self.pos += 2;
                    let start = self.pos;
                    let e = self.expression_statement_expr(start);
                    return unknown(vec![e], Vec::new());
                }
                _ => {}
            }
            // label
            if self.peek_at(1).is_some_and(|t| t.is_punct(":"))
                && !self.peek_at(2).is_some_and(|t| t.is_punct(":"))
            {
                self.pos += 2;
                return unknown(Vec::new(), Vec::new());
            }
        }
        if let Some(kind) = self.try_local_declaration() {
            return kind;
        }
        let start = self.pos;
        StatementKind::Expression {
            expr: self.expression_statement_expr(start),
        }
    }

    fn if_statement(&mut self) -> StatementKind {
        self.pos += 1;
        let condition = self.paren_expr("if");
        let then_branch = self.embedded_statement("if");
        let else_branch = if self.at_keyword("else") {
            self.pos += 1;
            Some(self.embedded_statement("else"))
        } else {
            None
        };
        StatementKind::If {
            condition,
            then_branch,
            else_branch,
        }
    }

    fn foreach_statement(&mut self) -> StatementKind {
        self.pos += 1;
        let header = self.paren_expr("foreach");
        if !header.text.split(' ').any(|w| w == "in") {
            self.diags.push(SyntaxDiagnostic::fatal(
                "expected 'in' in foreach header",
                header.span.start,
            ));
        }
        let body = self.embedded_statement("foreach");
        StatementKind::Foreach { header, body }
    }

    fn switch_statement(&mut self) -> StatementKind {
        self.pos += 1;
        let subject = self.paren_expr("switch");
        let mut sections = Vec::new();
        if !self.at_punct("{") {
            self.fatal("expected '{' after switch");
            return StatementKind::Switch { subject, sections };
        }
        self.pos += 1;
        loop {
            match self.peek() {
                None => {
                    self.fatal("expected '}' before end of input");
                    break;
                }
                Some(t) if t.is_punct("}") => {
                    self.pos += 1;
                    break;
                }
                Some(t) if t.is_keyword("case") || t.is_keyword("default") => {
                    let mut labels = Vec::new();
                    while self.at_keyword("case")
                        || (self.at_keyword("default")
                            && self.peek_at(1).is_some_and(|t| t.is_punct(":")))
                    {
                        let label_start = self.pos;
                        let mut depth = 0i32;
                        loop {
                            match self.peek() {
                                None => break,
                                Some(t) if depth == 0 && t.is_punct(":") => break,
                                Some(t)
                                    if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") =>
                                {
                                    depth += 1
                                }
                                Some(t)
                                    if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") =>
                                {
                                    depth -= 1
                                }
                                _ => {}
                            }
                            if depth < 0 {
                                break;
                            }
                            self.pos += 1;
                        }
                        labels.push(normalized_text(&self.toks[label_start..self.pos]));
                        if !self.expect_punct(":") {
                            break;
                        }
                    }
                    let mut body = Vec::new();
                    while let Some(t) = self.peek() {
                        if t.is_punct("}")
                            || t.is_keyword("case")
                            || (t.is_keyword("default")
                                && self.peek_at(1).is_some_and(|n| n.is_punct(":")))
                        {
                            break;
                        }
                        body.push(self.statement());
                    }
                    sections.push(SwitchSection { labels, body });
                }
                Some(_) => {
                    self.fatal("expected 'case' or 'default' in switch");
                    self.pos += 1;
                }
            }
        }
        StatementKind::Switch { subject, sections }
    }

    fn try_statement(&mut self) -> StatementKind {
        self.pos += 1;
        let body = self.block_statement();
        let mut catches = Vec::new();
        while self.at_keyword("catch") {
            self.pos += 1;
            let declaration = if self.at_punct("(") {
                Some(self.paren_expr("catch").text)
            } else {
                None
            };
            let filter = if self.at_word("when") {
                self.pos += 1;
                Some(self.paren_expr("when"))
            } else {
                None
            };
            let body = self.block_statement();
            catches.push(CatchClause {
                declaration,
                filter,
                body,
            });
        }
        let finally = if self.at_keyword("finally") {
            self.pos += 1;
            Some(self.block_statement())
        } else {
            None
        };
        if catches.is_empty() && finally.is_none() {
            self.fatal("expected 'catch' or 'finally' after try block");
        }
        StatementKind::Try {
            body,
            catches,
            finally,
        }
    }

    fn try_local_declaration(&mut self) -> Option<StatementKind> {
        let save = self.pos;
        let first = self.peek()?;
        if first.kind == TokenKind::Identifier && matches!(first.text.as_str(), "await" | "yield") {
            return None;
        }
        if first.is_keyword("const") || first.is_keyword("ref") {
            self.pos += 1;
        }
        let type_start = self.pos;
        // `var (a, b) = ...` deconstruction
        let deconstruct = self.at_word("var") && self.peek_at(1).is_some_and(|t| t.is_punct("("));
        if deconstruct {
            self.pos += 1;
        } else if !self.skip_type() {
            self.pos = save;
            return None;
        }
        let type_end = self.pos;
        let declarator_ok = if deconstruct {
            self.at_punct("(")
        } else {
            self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
                && self
                    .peek_at(1)
                    .is_some_and(|t| t.is_punct("=") || t.is_punct(";") || t.is_punct(","))
        };
        if !declarator_ok {
            self.pos = save;
            return None;
        }
        let type_name = normalized_text(&self.toks[type_start..type_end]);
        let start = self.pos;
        let declarators = self.expression_statement_expr(start);
        Some(StatementKind::LocalDeclaration {
            decl: LocalDeclaration {
                type_name,
                declarators,
            },
        })
    }

    /// Parses `( ... )` and returns its contents as an expression.
    fn paren_expr(&mut self, owner: &str) -> Expr {
        if !self.at_punct("(") {
            self.fatal(format!("expected '(' after '{owner}'"));
            return Expr::default();
        }
        self.pos += 1;
        let start = self.pos;
        let expr = self.scan_expression(start, |t, depth| depth == 0 && t.is_punct(")"));
        if self.at_punct(")") {
            self.pos += 1;
        } else {
            self.fatal(format!("expected ')' to close '{owner}'"));
        }
        expr
    }

    fn expression_statement(&mut self, start: usize) -> Statement {
        let offset = self
            .toks
            .get(start)
            .map(|t| t.byte_offset)
            .unwrap_or(self.eof);
        let expr = self.expression_statement_expr(start);
        Statement {
            span: Span::new(offset, self.prev_end().max(offset)),
            text: normalized_text(&self.toks[start..self.pos]),
            kind: StatementKind::Expression { expr },
        }
    }

    /// Scans an expression up to a top-level `;` and consumes the `;`.
    fn expression_statement_expr(&mut self, start: usize) -> Expr {
        let expr = self.scan_expression(start, |t, depth| {
            depth == 0 && (t.is_punct(";") || t.is_punct("}"))
        });
        if self.at_punct(";") {
            self.pos += 1;
        } else {
            self.fatal("expected ';'");
        }
        expr
    }

    /// Consumes tokens from `start` until `stop` matches at nesting depth 0
    /// (the stop token is not consumed) or a closer would underflow.
    /// Lambda and anonymous-delegate bodies are parsed as statements.
    fn scan_expression(&mut self, start: usize, stop: impl Fn(&Token, usize) -> bool) -> Expr {
        self.pos = start;
        let mut depth = 0usize;
        let mut own: Vec<usize> = Vec::new();
        let mut lambda_bodies = Vec::new();
        while let Some(tok) = self.peek() {
            if stop(tok, depth) {
                break;
            }
            let opens_body = tok.is_punct("{")
                && self.pos > start
                && (self.toks[self.pos - 1].is_punct("=>")
                    || self.toks[self.pos - 1].is_keyword("delegate")
                    || (self.toks[self.pos - 1].is_punct(")")
                        && matching_open(self.toks, self.pos - 1)
                            .and_then(|o| o.checked_sub(1))
                            .is_some_and(|o| self.toks[o].is_keyword("delegate"))));
            if opens_body {
                lambda_bodies.push(self.block());
                continue;
            }
            if tok.is_punct("(") || tok.is_punct("[") || tok.is_punct("{") {
                depth += 1;
            } else if tok.is_punct(")") || tok.is_punct("]") || tok.is_punct("}") {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            own.push(self.pos);
            self.pos += 1;
        }
        let own_toks: Vec<&Token> = own.iter().map(|&i| self.toks[i]).collect();
        let span = match (self.toks.get(start), self.pos > start) {
            (Some(first), true) => Span::new(first.byte_offset, self.prev_end()),
            _ => {
                let at = self.offset();
                Span::new(at, at)
            }
        };
        Expr {
            text: normalized_text(&self.toks[start..self.pos]),
            span,
            invocations: extract_invocations(&own_toks),
            has_conditional: has_conditional_expression(&own_toks),
            lambda_bodies,
        }
    }
}

fn unknown(exprs: Vec<Expr>, children: Vec<Statement>) -> StatementKind {
    StatementKind::Unknown { exprs, children }
}

fn split_top_level<'a, 't>(toks: &'a [&'t Token], sep: &str) -> Vec<&'a [&'t Token]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") || t.is_punct("<") {
            depth += 1;
        } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") || t.is_punct(">") {
            depth -= 1;
        } else if depth == 0 && t.is_punct(sep) {
            out.push(&toks[last..i]);
            last = i + 1;
        }
    }
    out.push(&toks[last..]);
    out
}

/// Keywords that look like calls but are not method invocations.
const NON_CALL_KEYWORDS: &[&str] = &["typeof", "sizeof", "default", "checked", "unchecked"];

/// Finds every call site in an expression token list.
pub(crate) fn extract_invocations(toks: &[&Token]) -> Vec<Invocation> {
    let mut out = Vec::new();
    for i in 0..toks.len() {
        let tok = toks[i];
        if tok.kind != TokenKind::Identifier {
            continue;
        }
        let mut next = i + 1;
        if toks.get(next).is_some_and(|t| t.is_punct("<")) {
            match generic_args_end(toks, next) {
                Some(end) => next = end,
                None => continue,
            }
        }
        if !toks.get(next).is_some_and(|t| t.is_punct("(")) {
            continue;
        }
        let mut callee = vec![tok.text.clone()];
        let mut j = i;
        let mut is_constructor = false;
        loop {
            if j >= 1 && toks[j - 1].is_keyword("new") {
                is_constructor = true;
                break;
            }
            if j >= 2 && (toks[j - 1].is_punct(".") || toks[j - 1].is_punct("?."))
                || j >= 2 && toks[j - 1].is_punct("::")
            {
                let k = j - 2;
                let prev = toks[k];
                if prev.kind == TokenKind::Identifier
                    || prev.is_keyword("this")
                    || prev.is_keyword("base")
                    || (prev.kind == TokenKind::Keyword && prev.text == "string")
                {
                    callee.push(prev.text.clone());
                    j = k;
                    continue;
                }
                if prev.is_punct(")") || prev.is_punct("]") {
                    let Some(open) = matching_open(toks, k) else {
                        break;
                    };
                    let mut head = open;
                    // skip generic args between name and `(`
                    if head >= 1 && toks[head - 1].is_punct(">") {
                        match generic_args_start(toks, head - 1) {
                            Some(lt) => head = lt,
                            None => break,
                        }
                    }
                    if head >= 1 && toks[head - 1].kind == TokenKind::Identifier {
                        callee.push(toks[head - 1].text.clone());
                        j = head - 1;
                        continue;
                    }
                }
                break;
            }
            // qualified constructor: `new A.B(`
            break;
        }
        if !is_constructor {
            // `new A.B.C(...)`: the chain walk stops at `A`; check what precedes it
            if j >= 1 && toks[j - 1].is_keyword("new") {
                is_constructor = true;
            }
        }
        callee.reverse();
        out.push(Invocation {
            callee,
            is_constructor,
            offset: tok.byte_offset,
        });
    }
    out.retain(|inv| !NON_CALL_KEYWORDS.contains(&inv.name()));
    out
}

fn generic_args_end(toks: &[&Token], lt: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(lt) {
        match t.text.as_str() {
            "<" => depth += 1,
            ">" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            "." | "," | "?" | "[" | "]" => {}
            _ if t.kind == TokenKind::Identifier || t.kind == TokenKind::Keyword => {}
            _ => return None,
        }
    }
    None
}

fn generic_args_start(toks: &[&Token], gt: usize) -> Option<usize> {
    let mut depth = 0usize;
    for i in (0..=gt).rev() {
        let t = toks[i];
        match t.text.as_str() {
            ">" => depth += 1,
            "<" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            "." | "," | "?" | "[" | "]" => {}
            _ if t.kind == TokenKind::Identifier || t.kind == TokenKind::Keyword => {}
            _ => return None,
        }
    }
    None
}

/// A ternary `?` with a matching `:` at the same nesting depth, or a
/// `switch` expression.
fn has_conditional_expression(toks: &[&Token]) -> bool {
    if toks.iter().any(|t| t.is_keyword("switch")) {
        return true;
    }
    for (i, t) in toks.iter().enumerate() {
        if !t.is_punct("?") {
            continue;
        }
        let mut depth = 0i32;
        for u in &toks[i + 1..] {
            if u.is_punct("(") || u.is_punct("[") || u.is_punct("{") {
                depth += 1;
            } else if u.is_punct(")") || u.is_punct("]") || u.is_punct("}") {
                depth -= 1;
                if depth < 0 {
                    break;
                }
            } else if depth == 0 && u.is_punct(":") {
                return true;
            } else if depth == 0 && (u.is_punct(";") || u.is_punct(",")) {
                break;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use StatementKind as K;

    #[test]
    fn prompt_figure_test_parses_cleanly() {
        let tree = parse_test_method(
            "[TestMethod] public void TestStop() { Assert.IsTrue(c.IsStopped()); }",
        );
        assert_eq!(tree.method_name, "TestStop");
        assert!(tree.diagnostics.is_empty(), "{:?}", tree.diagnostics);
        let body = tree.body.as_ref().unwrap();
        assert_eq!(body.len(), 1);
        assert!(matches!(body[0].kind, K::Expression { .. }));
        assert!(tree.is_test_method());
        assert_eq!(tree.return_type, "void");
        assert_eq!(tree.modifiers, ["public"]);
    }

    #[test]
    fn unbalanced_brace_is_fatal_but_name_recovered() {
        let tree = parse_test_method("public void T() {");
        assert!(tree.has_fatal());
        assert!(tree.body.is_none());
        assert_eq!(tree.method_name, "T");
    }

    #[test]
    fn if_with_block_matches_hand_drawn_tree() {
        let tree = parse_test_method("public void T() { if (a) { Assert.Fail(); } }");
        let body = tree.body.unwrap();
        assert_eq!(body.len(), 1);
        let K::If {
            condition,
            then_branch,
            else_branch,
        } = &body[0].kind
        else {
            panic!("expected if, got {:?}", body[0].kind);
        };
        assert_eq!(condition.text, "a");
        assert!(else_branch.is_none());
        let K::Block { statements } = &then_branch.kind else {
            panic!("expected block");
        };
        assert_eq!(statements.len(), 1);
        let K::Expression { expr } = &statements[0].kind else {
            panic!("expected expression statement");
        };
        assert_eq!(expr.invocations[0].callee, ["Assert", "Fail"]);
    }

    #[test]
    fn callee_chains() {
        let tree = parse_test_method(
            "void T() { command.Stop().Wait(); Assert.AreEqual(0, Add(\"\", 0)); var x = new Foo.Bar(1); }",
        );
        let chains: Vec<Vec<String>> = tree
            .invocations()
            .iter()
            .map(|i| i.callee.clone())
            .collect();
        assert_eq!(
            chains,
            vec![
                vec!["command", "Stop"],
                vec!["command", "Stop", "Wait"],
                vec!["Assert", "AreEqual"],
                vec!["Add"],
                vec!["Foo", "Bar"],
            ]
            .into_iter()
            .map(|v| v.into_iter().map(String::from).collect::<Vec<_>>())
            .collect::<Vec<_>>()
        );
        assert!(tree.invocations()[4].is_constructor);
    }

    #[test]
    fn generic_invocations_and_lambdas() {
        let src = "void T() { Assert.ThrowsException<ArgumentException>(() => { if (x) { sut.Add(null); } }); }";
        let tree = parse_test_method(src);
        assert!(tree.diagnostics.is_empty(), "{:?}", tree.diagnostics);
        let names: Vec<&str> = tree.invocations().iter().map(|i| i.name()).collect();
        assert_eq!(names, ["ThrowsException", "Add"]);
        let mut saw_if = false;
        tree.walk(|s| saw_if |= matches!(s.kind, K::If { .. }));
        assert!(saw_if);
    }

    #[test]
    fn statement_kinds() {
        let src = r#"
[TestMethod]
public async Task TestAll()
{
    int count = 0;
    var (a, b) = Pair();
    List<string> items = new List<string> { "a" };
    using var scope = Open();
    using (var s = Open()) { s.Run(); }
    for (int i = 0; i < 3; i++) count++;
    foreach (var item in items) { Console.WriteLine(item); }
    while (count > 0) count--;
    do { count++; } while (count < 2);
    switch (count) { case 1: break; case 2: default: count = 0; break; }
    try { Run(); } catch (Exception e) when (e != null) { } finally { Cleanup(); }
    lock (gate) { Run(); }
    unsafe { }
    await sut.StopAsync();
    return;
}"#;
        let tree = parse_test_method(src);
        assert!(tree.diagnostics.is_empty(), "{:?}", tree.diagnostics);
        let kinds: Vec<&str> = tree
            .body
            .as_ref()
            .unwrap()
            .iter()
            .map(|s| match s.kind {
                K::Expression { .. } => "expr",
                K::LocalDeclaration { .. } => "decl",
                K::If { .. } => "if",
                K::Switch { .. } => "switch",
                K::While { .. } => "while",
                K::Do { .. } => "do",
                K::For { .. } => "for",
                K::Foreach { .. } => "foreach",
                K::Try { .. } => "try",
                K::Using { .. } => "using",
                K::Return { .. } => "return",
                K::Throw { .. } => "throw",
                K::Block { .. } => "block",
                K::Unknown { .. } => "unknown",
            })
            .collect();
        assert_eq!(
            kinds,
            [
                "decl", "decl", "decl", "using", "using", "for", "foreach", "while", "do",
                "switch", "try", "unknown", "unknown", "expr", "return"
            ]
        );
        assert_eq!(tree.return_type, "Task");
        assert_eq!(tree.modifiers, ["public", "async"]);
    }

    #[test]
    fn ternary_detection_ignores_nullable_types() {
        let t = parse_test_method("void T() { int? x = null; var y = x ?? 1; var z = a?.B; }");
        let mut cond = false;
        t.walk(|s| cond |= s.exprs().iter().any(|e| e.has_conditional));
        assert!(!cond);
        let t = parse_test_method("void T() { var y = flag ? 1 : 2; }");
        let mut cond = false;
        t.walk(|s| cond |= s.exprs().iter().any(|e| e.has_conditional));
        assert!(cond);
    }

    #[test]
    fn missing_semicolon_is_fatal() {
        let t = parse_test_method("void T() { Assert.IsTrue(x) }");
        assert!(t.has_fatal());
        assert_eq!(t.recovered_body.len(), 1);
    }

    #[test]
    fn truncated_mid_statement() {
        let t = parse_test_method(
            "[TestMethod]\npublic void TestStop()\n{\n    var c = new C();\n    Assert.IsTr",
        );
        assert!(t.has_fatal());
        assert_eq!(t.method_name, "TestStop");
        assert_eq!(t.recovered_body.len(), 2);
    }

    #[test]
    fn trailing_text_is_fatal() {
        let t = parse_test_method("void T() { }\nsrc/Foo/TestFoo.cs:");
        assert!(t.has_fatal());
    }

    #[test]
    fn expression_bodied_method() {
        let t = parse_test_method("[TestMethod] public void T() => Assert.IsTrue(Run());");
        assert!(!t.has_fatal(), "{:?}", t.diagnostics);
        assert_eq!(t.invocations().len(), 2);
    }

    #[test]
    fn attributes_recorded_verbatim() {
        let t = parse_test_method(
            "[TestMethod, Timeout(100)]\n[DataRow(1, \"a\")]\npublic void T(int n, string s) { }",
        );
        let names: Vec<&str> = t.attributes.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["TestMethod", "Timeout", "DataRow"]);
        assert_eq!(t.attributes[2].text, "DataRow ( 1 , \"a\" )");
        assert_eq!(t.parameters, ["int n", "string s"]);
    }

    #[test]
    fn comments_inside_span_only() {
        let t = parse_test_method("// before\nvoid T() {\n // arrange\n /* x */ }\n");
        assert_eq!(t.comments.len(), 2);
    }

    #[test]
    fn syntax_verdicts() {
        assert!(
            check_syntax("[TestMethod] public void T() { var a = 1; Assert.AreEqual(1, a); }")
                .correct
        );
        assert!(
            !check_syntax("[TestMethod] public void T() { var a = 1; Assert.AreEqual(1,").correct
        );
        assert!(check_syntax("[TestMethod] public void T() { unsafe { } }").correct);
        assert!(!check_syntax("[TestMethod] public void T() { var s = \"abc; }").correct);
        assert!(!check_syntax("").correct);
        assert!(!check_syntax("[TestMethod] public void T() { try { } }").correct);
        assert!(!check_syntax("[TestMethod] public void T() { if x { } }").correct);
    }

    #[test]
    fn local_function_like_garbage_does_not_hang() {
        for src in [
            "void T() { } } }",
            "void T() { ) }",
            "void T() { case 1: }",
            "{ { {",
            "]]]",
            "void T() { else { } }",
        ] {
            let t = parse_test_method(src);
            assert!(t.has_fatal(), "{src}");
        }
    }

    proptest::proptest! {
        #[test]
        fn parse_never_panics_and_is_deterministic(src in "[ \\n{}();=a-c.\\[\\]\"'ifwhltry?:]{0,80}") {
            let a = parse_test_method(&src);
            let b = parse_test_method(&src);
            proptest::prop_assert_eq!(&a, &b);
            proptest::prop_assert_eq!(a.body.is_some(), !a.has_fatal());
        }
    }
}
