//! Member-level parser for focal files.
//!
//! Only the structure needed to abbreviate a file is recovered: using
//! directives, namespaces, type declarations and their members with source
//! spans. Method bodies are not parsed; they are skipped by brace matching.

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenKind};
use super::{delimiter_diagnostics, matching_close, Span, SyntaxDiagnostic};
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsingDirective {
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamespaceNode {
    pub name: String,
    pub span: Span,
    pub file_scoped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberKind {
    Field,
    Property,
    Method,
    Constructor,
    Comment,
    Type(Box<ClassNode>),
    /// Enums, delegates and anything else kept as a raw span.
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub kind: MemberKind,
    pub name: String,
    /// Whole member, from its first attribute to the closing `;` or `}`.
    pub span: Span,
    /// Methods and constructors: modifiers through the closing `)` of the
    /// parameter list.
    pub signature: Option<Span>,
    pub body: Option<Span>,
}

impl Member {
    pub fn is_method_like(&self) -> bool {
        matches!(self.kind, MemberKind::Method | MemberKind::Constructor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassNode {
    pub name: String,
    /// `class`, `struct`, `interface` or `record`.
    pub keyword: String,
    pub span: Span,
    /// Declaration up to (not including) the opening brace, trailing
    /// whitespace excluded.
    pub header: Span,
    /// Offset of the opening `{`.
    pub open_brace: usize,
    /// Offset of the closing `}`.
    pub close_brace: usize,
    /// Members ordered by position, comments included.
    pub members: Vec<Member>,
}

impl ClassNode {
    pub fn fields(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| m.kind == MemberKind::Field)
    }

    pub fn methods(&self) -> impl Iterator<Item = &Member> {
        self.members.iter().filter(|m| m.is_method_like())
    }

    pub fn comments(&self) -> impl Iterator<Item = &Member> {
        self.members
            .iter()
            .filter(|m| m.kind == MemberKind::Comment)
    }

    pub fn nested(&self) -> impl Iterator<Item = &ClassNode> {
        self.members.iter().filter_map(|m| match &m.kind {
            MemberKind::Type(c) => Some(c.as_ref()),
            _ => None,
        })
    }

    /// Finds the innermost class declaring a method named `method`,
    /// searching this class first and then nested classes.
    pub fn find_method(&self, method: &str) -> Option<(&ClassNode, &Member)> {
        if let Some(m) = self
            .members
            .iter()
            .find(|m| m.kind == MemberKind::Method && m.name == method)
        {
            return Some((self, m));
        }
        self.nested().find_map(|c| c.find_method(method))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocalFileTree {
    pub source: String,
    pub using_directives: Vec<UsingDirective>,
    pub namespaces: Vec<NamespaceNode>,
    /// Top-level classes (including those inside namespaces).
    pub classes: Vec<ClassNode>,
}

impl FocalFileTree {
    pub fn find_method(&self, method: &str) -> Option<(&ClassNode, &Member)> {
        self.classes.iter().find_map(|c| c.find_method(method))
    }
}

pub fn parse_focal_file(source: &str) -> Result<FocalFileTree, ParseError> {
    let tokens = tokenize(source);
    let significant: Vec<&Token> = tokens.iter().filter(|t| !t.kind.is_trivia()).collect();
    if let Some(d) = delimiter_diagnostics(&significant).into_iter().next() {
        return Err(fatal(d));
    }
    let comments: Vec<Span> = tokens
        .iter()
        .filter(|t| t.kind.is_comment())
        .map(|t| Span::new(t.byte_offset, t.end()))
        .collect();
    let mut parser = FileParser {
        toks: &significant,
        comments: &comments,
        src: source,
        tree: FocalFileTree {
            source: source.to_string(),
            using_directives: Vec::new(),
            namespaces: Vec::new(),
            classes: Vec::new(),
        },
    };
    parser.top_level(0, significant.len())?;
    Ok(parser.tree)
}

fn fatal(d: SyntaxDiagnostic) -> ParseError {
    ParseError::FatalSyntax {
        message: d.message,
        offset: d.offset,
    }
}

struct FileParser<'t> {
    toks: &'t [&'t Token],
    comments: &'t [Span],
    src: &'t str,
    tree: FocalFileTree,
}

const TYPE_KEYWORDS: &[&str] = &["class", "struct", "interface"];

impl<'t> FileParser<'t> {
    fn close_of(&self, open: usize) -> Result<usize, ParseError> {
        matching_close(self.toks, open).ok_or_else(|| ParseError::FatalSyntax {
            message: format!("unclosed '{}'", self.toks[open].text),
            offset: self.toks[open].byte_offset,
        })
    }

    /// Index of the first `;` at depth 0 in `[from, end)`, or `end`.
    fn statement_end(&self, from: usize, end: usize) -> Result<usize, ParseError> {
        let mut i = from;
        while i < end {
            let t = self.toks[i];
            if t.is_punct(";") {
                return Ok(i);
            }
            if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                i = self.close_of(i)?;
            }
            i += 1;
        }
        Ok(end.saturating_sub(1).max(from))
    }

    fn top_level(&mut self, start: usize, end: usize) -> Result<(), ParseError> {
        let mut i = start;
        while i < end {
            let t = self.toks[i];
            let is_using_directive = (t.is_keyword("using")
                && !self.toks.get(i + 1).is_some_and(|n| n.is_punct("(")))
                || (t.text == "global"
                    && self.toks.get(i + 1).is_some_and(|n| n.is_keyword("using")));
            if is_using_directive {
                let semi = self.statement_end(i, end)?;
                let span = self.span_of(i, semi);
                self.tree.using_directives.push(UsingDirective {
                    text: span.text(self.src).to_string(),
                    span,
                });
                i = semi + 1;
                continue;
            }
            if t.is_keyword("namespace") {
                let mut j = i + 1;
                while j < end && !self.toks[j].is_punct("{") && !self.toks[j].is_punct(";") {
                    j += 1;
                }
                let name: String = self.toks[i + 1..j]
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect();
                if j < end && self.toks[j].is_punct("{") {
                    let close = self.close_of(j)?;
                    self.tree.namespaces.push(NamespaceNode {
                        name,
                        span: self.span_of(i, close),
                        file_scoped: false,
                    });
                    self.top_level(j + 1, close)?;
                    i = close + 1;
                } else {
                    let last = end.saturating_sub(1).max(j.min(end.saturating_sub(1)));
                    self.tree.namespaces.push(NamespaceNode {
                        name,
                        span: self.span_of(i, last),
                        file_scoped: true,
                    });
                    i = j + 1;
                }
                continue;
            }
            let (member, next) = self.member(i, end, None)?;
            if let MemberKind::Type(class) = member.kind {
                self.tree.classes.push(*class);
            }
            i = next;
        }
        Ok(())
    }

    fn span_of(&self, first: usize, last: usize) -> Span {
        Span::new(self.toks[first].byte_offset, self.toks[last].end())
    }

    /// Parses the members between a class's braces, interleaving comments
    /// that are not inside any member.
    fn members(
        &mut self,
        start: usize,
        end: usize,
        class_name: &str,
        body: Span,
    ) -> Result<Vec<Member>, ParseError> {
        let mut members = Vec::new();
        let mut i = start;
        while i < end {
            let (member, next) = self.member(i, end, Some(class_name))?;
            members.push(member);
            i = next;
        }
        for &c in self.comments {
            if body.encloses(c) && !members.iter().any(|m: &Member| m.span.encloses(c)) {
                members.push(Member {
                    kind: MemberKind::Comment,
                    name: String::new(),
                    span: c,
                    signature: None,
                    body: None,
                });
            }
        }
        members.sort_by_key(|m| m.span.start);
        Ok(members)
    }

    /// Parses one member starting at token `start`; returns it with the
    /// index of the first token after it.
    fn member(
        &mut self,
        start: usize,
        end: usize,
        class_name: Option<&str>,
    ) -> Result<(Member, usize), ParseError> {
        let mut i = start;
        while i < end
            && self.toks[i].kind == TokenKind::AttributeBracket
            && self.toks[i].text == "["
        {
            i = self.close_of(i)? + 1;
        }
        if i >= end {
            let last = end - 1;
            return Ok((self.other(start, last), end));
        }
        let decl_start = i;

        // scan the header up to the first structural token at depth 0
        let mut j = i;
        let mut paren: Option<usize> = None;
        let mut type_keyword: Option<usize> = None;
        let mut saw_operator = false;
        while j < end {
            let t = self.toks[j];
            if t.is_punct("{") || t.is_punct(";") || t.is_punct("=>") || t.is_punct("=") {
                break;
            }
            if type_keyword.is_none()
                && (TYPE_KEYWORDS.iter().any(|k| t.is_keyword(k))
                    || t.is_keyword("enum")
                    || (t.text == "record"
                        && t.kind == TokenKind::Identifier
                        && self.toks.get(j + 1).is_some_and(|n| {
                            n.kind == TokenKind::Identifier
                                || n.is_keyword("class")
                                || n.is_keyword("struct")
                        })))
            {
                type_keyword = Some(j);
            }
            if t.is_keyword("operator") {
                saw_operator = true;
            }
            if t.is_punct("(") || t.is_punct("[") {
                let prev = j.checked_sub(1).map(|p| self.toks[p]);
                let call_like = t.is_punct("(")
                    && type_keyword.is_none()
                    && j > decl_start
                    && (saw_operator
                        || prev
                            .is_some_and(|p| p.kind == TokenKind::Identifier || p.is_punct(">")));
                if call_like {
                    paren = Some(j);
                    break;
                }
                j = self.close_of(j)? + 1;
                continue;
            }
            j += 1;
        }

        if let Some(k) = type_keyword {
            return self.type_declaration(start, decl_start, k, end);
        }
        if self.toks[decl_start].is_keyword("delegate")
            || self.toks[decl_start..j.min(end)]
                .iter()
                .any(|t| t.is_keyword("delegate"))
        {
            let semi = self.statement_end(j, end)?;
            return Ok((self.other(start, semi), semi + 1));
        }

        if let Some(open) = paren {
            return self.method(start, decl_start, open, end, class_name);
        }

        if j >= end {
            return Ok((self.other(start, end - 1), end));
        }
        let stop = self.toks[j];
        let name = self.declared_name(decl_start, j);
        if stop.is_punct("{") {
            // property, indexer or event accessor block
            let close = self.close_of(j)?;
            let mut last = close;
            if self.toks.get(close + 1).is_some_and(|t| t.is_punct("=")) && close + 1 < end {
                last = self.statement_end(close + 1, end)?;
            }
            let member = Member {
                kind: MemberKind::Property,
                name,
                span: self.span_of(start, last),
                signature: None,
                body: Some(self.span_of(j, close)),
            };
            return Ok((member, last + 1));
        }
        let semi = self.statement_end(j, end)?;
        let kind = if stop.is_punct("=>") {
            MemberKind::Property
        } else {
            MemberKind::Field
        };
        let member = Member {
            kind,
            name,
            span: self.span_of(start, semi),
            signature: None,
            body: None,
        };
        Ok((member, semi + 1))
    }

    fn other(&self, start: usize, last: usize) -> Member {
        Member {
            kind: MemberKind::Other,
            name: String::new(),
            span: self.span_of(start, last),
            signature: None,
            body: None,
        }
    }

    /// Name of a field or property: the last identifier before the stop
    /// token, ignoring a trailing indexer parameter list.
    fn declared_name(&self, from: usize, stop: usize) -> String {
        let head = &self.toks[from..stop];
        if let Some(t) = head.iter().rev().find(|t| t.is_keyword("this")) {
            return t.text.clone();
        }
        // first declarator in `int a, b;`
        let first_decl_end = head
            .iter()
            .position(|t| t.is_punct(","))
            .unwrap_or(head.len());
        head[..first_decl_end]
            .iter()
            .rev()
            .find(|t| t.kind == TokenKind::Identifier)
            .map(|t| t.text.clone())
            .unwrap_or_default()
    }

    fn method(
        &mut self,
        start: usize,
        decl_start: usize,
        open: usize,
        end: usize,
        class_name: Option<&str>,
    ) -> Result<(Member, usize), ParseError> {
        let close = self.close_of(open)?;
        let mut name_idx = open - 1;
        if self.toks[name_idx].is_punct(">") {
            // generic method: walk back to the `<`
            let mut depth = 0usize;
            while name_idx > decl_start {
                let t = self.toks[name_idx];
                if t.is_punct(">") {
                    depth += 1;
                } else if t.is_punct("<") {
                    depth -= 1;
                    if depth == 0 {
                        name_idx -= 1;
                        break;
                    }
                }
                name_idx -= 1;
            }
        }
        let operator_at = self.toks[decl_start..open]
            .iter()
            .position(|t| t.is_keyword("operator"));
        let name = match operator_at {
            Some(p) => self.toks[decl_start + p..open]
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
            None => self.toks[name_idx].text.clone(),
        };
        let is_ctor = class_name.is_some_and(|c| c == name)
            || (name_idx > 0 && self.toks[name_idx - 1].is_punct("~"));
        let signature = self.span_of(decl_start, close);

        // skip constraints / base initializer up to the body
        let mut j = close + 1;
        while j < end {
            let t = self.toks[j];
            if t.is_punct("{") || t.is_punct(";") || t.is_punct("=>") {
                break;
            }
            if t.is_punct("(") || t.is_punct("[") {
                j = self.close_of(j)?;
            }
            j += 1;
        }
        let (last, body) = if j >= end {
            (end - 1, None)
        } else if self.toks[j].is_punct("{") {
            let body_close = self.close_of(j)?;
            (body_close, Some(self.span_of(j, body_close)))
        } else if self.toks[j].is_punct("=>") {
            let semi = self.statement_end(j, end)?;
            (semi, Some(self.span_of(j, semi)))
        } else {
            (j, None)
        };
        let member = Member {
            kind: if is_ctor {
                MemberKind::Constructor
            } else {
                MemberKind::Method
            },
            name,
            span: self.span_of(start, last),
            signature: Some(signature),
            body,
        };
        Ok((member, last + 1))
    }

    fn type_declaration(
        &mut self,
        start: usize,
        decl_start: usize,
        keyword_idx: usize,
        end: usize,
    ) -> Result<(Member, usize), ParseError> {
        let keyword_tok = self.toks[keyword_idx];
        let mut name_idx = keyword_idx + 1;
        // `record class Foo`, `record struct Foo`
        if keyword_tok.text == "record"
            && self
                .toks
                .get(name_idx)
                .is_some_and(|t| t.is_keyword("class") || t.is_keyword("struct"))
        {
            name_idx += 1;
        }
        let name = self
            .toks
            .get(name_idx)
            .filter(|t| t.kind == TokenKind::Identifier)
            .map(|t| t.text.clone())
            .unwrap_or_default();

        // find the body brace or a terminating `;` (positional records)
        let mut j = name_idx;
        while j < end && !self.toks[j].is_punct("{") && !self.toks[j].is_punct(";") {
            if self.toks[j].is_punct("(") || self.toks[j].is_punct("[") {
                j = self.close_of(j)?;
            }
            j += 1;
        }
        if j >= end || self.toks[j].is_punct(";") {
            let last = j.min(end - 1);
            return Ok((self.other(start, last), last + 1));
        }
        let open = j;
        let close = self.close_of(open)?;
        let mut last = close;
        if self.toks.get(close + 1).is_some_and(|t| t.is_punct(";")) && close + 1 < end {
            last = close + 1;
        }
        if keyword_tok.is_keyword("enum") {
            let mut m = self.other(start, last);
            m.name = name;
            return Ok((m, last + 1));
        }
        let header_end = self.toks[open - 1].end();
        let header_start = self.toks[decl_start].byte_offset;
        let body_span = Span::new(self.toks[open].end(), self.toks[close].byte_offset);
        let members = self.members(open + 1, close, &name, body_span)?;
        let class = ClassNode {
            name: name.clone(),
            keyword: keyword_tok.text.clone(),
            span: self.span_of(start, last),
            header: Span::new(header_start, header_end),
            open_brace: self.toks[open].byte_offset,
            close_brace: self.toks[close].byte_offset,
            members,
        };
        let member = Member {
            kind: MemberKind::Type(Box::new(class)),
            name,
            span: self.span_of(start, last),
            signature: None,
            body: Some(self.span_of(open, close)),
        };
        Ok((member, last + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCHMARK: &str = r#"using System;
using System.Linq;
using System.Threading.Tasks;

namespace Bench.Commands
{
    /// <summary>Runs benchmarks.</summary>
    public class BenchmarkCommand : ICommand
    {
        private WriteBenchmarkCommand _writeBenchmark = new WriteBenchmarkCommand();
        private ReadBenchmarkCommand _readBenchmark = new ReadBenchmarkCommand();

        // Starts both benchmarks.
        public async Task Start()
        {
            await _writeBenchmark.Start();
            await _readBenchmark.Start();
        }

        public async Task Stop()
        {
            await _writeBenchmark.Stop();
            await _readBenchmark.Stop();
        }

        public bool IsStopped() => _writeBenchmark.IsStopped && _readBenchmark.IsStopped;
    }
}
"#;

    #[test]
    fn benchmark_command_structure() {
        let tree = parse_focal_file(BENCHMARK).unwrap();
        assert_eq!(tree.using_directives.len(), 3);
        assert_eq!(tree.namespaces.len(), 1);
        assert_eq!(tree.namespaces[0].name, "Bench.Commands");
        assert_eq!(tree.classes.len(), 1);
        let class = &tree.classes[0];
        assert_eq!(class.name, "BenchmarkCommand");
        let fields: Vec<_> = class.fields().collect();
        assert_eq!(fields.len(), 2);
        assert_eq!(fields[0].name, "_writeBenchmark");
        assert_eq!(
            fields[0].span.text(BENCHMARK),
            "private WriteBenchmarkCommand _writeBenchmark = new WriteBenchmarkCommand();"
        );
        let methods: Vec<&str> = class.methods().map(|m| m.name.as_str()).collect();
        assert_eq!(methods, ["Start", "Stop", "IsStopped"]);
        assert_eq!(class.comments().count(), 1);
        let stop = class.methods().nth(1).unwrap();
        assert_eq!(
            stop.signature.unwrap().text(BENCHMARK),
            "public async Task Stop()"
        );
        assert!(stop.body.unwrap().text(BENCHMARK).starts_with('{'));
        assert_eq!(
            class.header.text(BENCHMARK),
            "public class BenchmarkCommand : ICommand"
        );
    }

    #[test]
    fn one_class_two_methods() {
        let src = "class A { void F() { } int G(int x) => x; }";
        let tree = parse_focal_file(src).unwrap();
        assert_eq!(tree.classes.len(), 1);
        assert_eq!(tree.classes[0].methods().count(), 2);
    }

    #[test]
    fn nested_class_is_member_of_outer() {
        let src = "public class Outer {\n  int x;\n  public class Inner { public void Run() { } }\n  public void Go() { }\n}";
        let tree = parse_focal_file(src).unwrap();
        assert_eq!(tree.classes.len(), 1);
        let outer = &tree.classes[0];
        let inner: Vec<_> = outer.nested().collect();
        assert_eq!(inner.len(), 1);
        assert_eq!(inner[0].name, "Inner");
        // spans from hand annotation
        let inner_start = src.find("public class Inner").unwrap();
        let inner_end = src.find("{ } }").unwrap() + "{ } }".len();
        assert_eq!(inner[0].span, Span::new(inner_start, inner_end));
        assert!(outer.span.encloses(inner[0].span));
        let (owner, m) = tree.find_method("Run").unwrap();
        assert_eq!(owner.name, "Inner");
        assert_eq!(m.name, "Run");
    }

    #[test]
    fn methods_do_not_overlap_and_lie_in_class() {
        let tree = parse_focal_file(BENCHMARK).unwrap();
        let class = &tree.classes[0];
        for w in class.members.windows(2) {
            assert!(w[0].span.end <= w[1].span.start);
        }
        for m in &class.members {
            assert!(class.span.encloses(m.span));
        }
    }

    #[test]
    fn constructors_properties_generics_and_operators() {
        let src = r#"
public sealed class Calc<T> : IDisposable where T : struct
{
    [Obsolete]
    public Calc(int seed) : base() { _seed = seed; }
    public int Seed { get; private set; } = 3;
    public int this[int i] => i;
    public event EventHandler Changed;
    public (int, int) Pair() { return (1, 2); }
    public T Echo<U>(T value, U other) where U : class { return value; }
    public static Calc<T> operator +(Calc<T> a, Calc<T> b) => a;
    public abstract void Later();
    private enum Mode { A, B }
    public void Dispose() { }
}
file-scoped-garbage-is-not-here"#;
        let src = src.trim_end_matches("file-scoped-garbage-is-not-here");
        let tree = parse_focal_file(src).unwrap();
        let class = &tree.classes[0];
        let kinds: Vec<(String, &str)> = class
            .members
            .iter()
            .map(|m| {
                let k = match m.kind {
                    MemberKind::Field => "field",
                    MemberKind::Property => "property",
                    MemberKind::Method => "method",
                    MemberKind::Constructor => "ctor",
                    MemberKind::Comment => "comment",
                    MemberKind::Type(_) => "type",
                    MemberKind::Other => "other",
                };
                (m.name.clone(), k)
            })
            .collect();
        let expected = [
            ("Calc", "ctor"),
            ("Seed", "property"),
            ("this", "property"),
            ("Changed", "field"),
            ("Pair", "method"),
            ("Echo", "method"),
            ("operator +", "method"),
            ("Later", "method"),
            ("Mode", "other"),
            ("Dispose", "method"),
        ];
        assert_eq!(kinds.len(), expected.len(), "{kinds:?}");
        for ((name, kind), (en, ek)) in kinds.iter().zip(expected) {
            assert_eq!((name.as_str(), *kind), (en, ek));
        }
        assert!(class.members[0].span.text(src).starts_with("[Obsolete]"));
    }

    #[test]
    fn file_scoped_namespace_and_records() {
        let src = "namespace A.B;\nusing X;\npublic record Point(int X, int Y);\npublic record class Box { public int W { get; init; } public int Area() => W * W; }\n";
        let tree = parse_focal_file(src).unwrap();
        assert!(tree.namespaces[0].file_scoped);
        assert_eq!(tree.using_directives.len(), 1);
        assert_eq!(tree.classes.len(), 1);
        assert_eq!(tree.classes[0].name, "Box");
        assert_eq!(tree.classes[0].methods().count(), 1);
    }

    #[test]
    fn unbalanced_braces_are_fatal() {
        assert!(matches!(
            parse_focal_file("class A { void F() { }"),
            Err(ParseError::FatalSyntax { .. })
        ));
    }
}
