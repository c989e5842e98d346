//! The Quality Analyzer: seven static properties of a single test method and
//! corpus-level frequencies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::AnalyzerError;
use crate::parser::{parse_test_method, Statement, StatementKind, TestSyntaxTree};

/// MSTest assertion classes.
pub const ASSERTION_CLASSES: &[&str] = &["Assert", "StringAssert", "CollectionAssert"];

/// Minimum number of extra alphanumeric characters for a descriptive name.
pub const DESCRIPTIVE_REMAINDER_MIN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    CorrectSyntax,
    HasAssertion,
    InvokesFocal,
    HasComment,
    DescriptiveName,
    DuplicateAssertion,
    ConditionalOrException,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::CorrectSyntax,
        Property::HasAssertion,
        Property::InvokesFocal,
        Property::HasComment,
        Property::DescriptiveName,
        Property::DuplicateAssertion,
        Property::ConditionalOrException,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::CorrectSyntax => "correct_syntax",
            Property::HasAssertion => "has_assertion",
            Property::InvokesFocal => "invokes_focal",
            Property::HasComment => "has_comment",
            Property::DescriptiveName => "descriptive_name",
            Property::DuplicateAssertion => "duplicate_assertion",
            Property::ConditionalOrException => "conditional_or_exception",
        }
    }

    /// Row label used in frequency tables.
    pub fn label(self) -> &'static str {
        match self {
            Property::CorrectSyntax => "Correct Syntax",
            Property::HasAssertion => "Contains Assertion",
            Property::InvokesFocal => "Invokes Focal Method",
            Property::HasComment => "Includes Comment",
            Property::DescriptiveName => "Has Descriptive Name",
            Property::DuplicateAssertion => "Duplicate Assertion",
            Property::ConditionalOrException => "Conditional/Exception",
        }
    }

    pub fn is_smell(self) -> bool {
        matches!(
            self,
            Property::DuplicateAssertion | Property::ConditionalOrException
        )
    }
}

impl std::str::FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let p = match key.as_str() {
            "correct_syntax" | "syntax" => Property::CorrectSyntax,
            "has_assertion" | "assertion" => Property::HasAssertion,
            "invokes_focal" | "focal" => Property::InvokesFocal,
            "has_comment" | "comment" => Property::HasComment,
            "descriptive_name" | "descriptive" => Property::DescriptiveName,
            "duplicate_assertion" | "dup" | "duplicate" => Property::DuplicateAssertion,
            "conditional_or_exception" | "conditional" | "cond" => Property::ConditionalOrException,
            _ => return Err(format!("unknown property `{s}`")),
        };
        Ok(p)
    }
}

impl std::fmt::Display for Property {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub correct_syntax: bool,
    pub has_assertion: bool,
    pub invokes_focal: bool,
    pub has_comment: bool,
    pub descriptive_name: bool,
    pub duplicate_assertion: bool,
    pub conditional_or_exception: bool,
    pub focal_method_name: String,
    /// Set when the structural properties were computed from a recovered
    /// tree because the syntax check failed.
    #[serde(default)]
    pub low_confidence: bool,
}

impl QualityReport {
    pub fn get(&self, property: Property) -> bool {
        match property {
            Property::CorrectSyntax => self.correct_syntax,
            Property::HasAssertion => self.has_assertion,
            Property::InvokesFocal => self.invokes_focal,
            Property::HasComment => self.has_comment,
            Property::DescriptiveName => self.descriptive_name,
            Property::DuplicateAssertion => self.duplicate_assertion,
            Property::ConditionalOrException => self.conditional_or_exception,
        }
    }

    pub fn set(&mut self, property: Property, value: bool) {
        let slot = match property {
            Property::CorrectSyntax => &mut self.correct_syntax,
            Property::HasAssertion => &mut self.has_assertion,
            Property::InvokesFocal => &mut self.invokes_focal,
            Property::HasComment => &mut self.has_comment,
            Property::DescriptiveName => &mut self.descriptive_name,
            Property::DuplicateAssertion => &mut self.duplicate_assertion,
            Property::ConditionalOrException => &mut self.conditional_or_exception,
        };
        *slot = value;
    }

    /// Correct syntax, assertion, focal call, no duplicate assertion and no
    /// conditional logic.
    pub fn is_golden(&self) -> bool {
        self.correct_syntax
            && self.has_assertion
            && self.invokes_focal
            && !self.duplicate_assertion
            && !self.conditional_or_exception
    }
}

fn is_assertion_chain(callee: &[String]) -> bool {
    let is_class = |s: &String| ASSERTION_CLASSES.contains(&s.as_str());
    match callee {
        [] | [_] => false,
        [first, ..] if is_class(first) => true,
        // fully qualified, e.g. Microsoft.VisualStudio.TestTools.UnitTesting.Assert.IsTrue
        [.., class, _] => is_class(class),
    }
}

fn statement_is_assertion(stmt: &Statement) -> bool {
    match &stmt.kind {
        StatementKind::Expression { expr } => expr
            .invocations
            .iter()
            .any(|inv| is_assertion_chain(&inv.callee)),
        _ => false,
    }
}

pub fn detect_assertion(tree: &TestSyntaxTree) -> bool {
    tree.invocations()
        .iter()
        .any(|inv| is_assertion_chain(&inv.callee))
}

/// Case-sensitive match on the final callee identifier, anywhere in the
/// body including assertion arguments and lambda bodies.
pub fn detect_focal_call(tree: &TestSyntaxTree, focal_name: &str) -> bool {
    !focal_name.is_empty()
        && tree
            .invocations()
            .iter()
            .any(|inv| inv.name() == focal_name)
}

pub fn detect_comment(tree: &TestSyntaxTree) -> bool {
    !tree.comments.is_empty()
}

/// Strips one leading `Test` and one occurrence of the focal name; the rest
/// must contain at least [`DESCRIPTIVE_REMAINDER_MIN`] alphanumerics.
pub fn detect_descriptive_name(tree: &TestSyntaxTree, focal_name: &str) -> bool {
    descriptive_remainder(&tree.method_name, focal_name) >= DESCRIPTIVE_REMAINDER_MIN
}

fn descriptive_remainder(method_name: &str, focal_name: &str) -> usize {
    let name = method_name.strip_prefix("Test").unwrap_or(method_name);
    let rest = if focal_name.is_empty() {
        name.to_string()
    } else {
        name.replacen(focal_name, "", 1)
    };
    rest.chars().filter(|c| c.is_alphanumeric()).count()
}

/// Two adjacent statements in the same statement list that are both
/// assertions and identical after whitespace normalization.
pub fn detect_duplicate_assertion(tree: &TestSyntaxTree) -> bool {
    tree.statement_lists().iter().any(|list| {
        list.windows(2)
            .any(|w| statement_is_assertion(&w[0]) && w[0].text == w[1].text)
    })
}

pub fn detect_conditional_or_exception(tree: &TestSyntaxTree) -> bool {
    let mut found = false;
    tree.walk(|s| {
        found |= s.is_control_flow() || s.exprs().iter().any(|e| e.has_conditional);
    });
    found
}

/// Runs the syntax check and all six detectors on one raw test.
pub fn analyze(raw_test: &str, focal_name: &str) -> QualityReport {
    let tree = parse_test_method(raw_test);
    analyze_tree(&tree, focal_name)
}

pub fn analyze_tree(tree: &TestSyntaxTree, focal_name: &str) -> QualityReport {
    let correct_syntax = !tree.has_fatal();
    QualityReport {
        correct_syntax,
        has_assertion: detect_assertion(tree),
        invokes_focal: detect_focal_call(tree, focal_name),
        has_comment: detect_comment(tree),
        descriptive_name: detect_descriptive_name(tree, focal_name),
        duplicate_assertion: detect_duplicate_assertion(tree),
        conditional_or_exception: detect_conditional_or_exception(tree),
        focal_method_name: focal_name.to_string(),
        low_confidence: !correct_syntax,
    }
}

/// Which properties count toward the corpus quality score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub positives: Vec<Property>,
    pub smells: Vec<Property>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            positives: vec![Property::HasAssertion, Property::InvokesFocal],
            smells: vec![
                Property::DuplicateAssertion,
                Property::ConditionalOrException,
            ],
        }
    }
}

impl ScoreConfig {
    /// Default sets plus the documentation properties as positives.
    pub fn with_documentation() -> Self {
        let mut cfg = ScoreConfig::default();
        cfg.positives
            .extend([Property::HasComment, Property::DescriptiveName]);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: usize,
    pub frequencies: BTreeMap<Property, f64>,
    pub quality_score: f64,
}

impl CorpusStats {
    pub fn frequency(&self, property: Property) -> f64 {
        self.frequencies.get(&property).copied().unwrap_or(0.0)
    }
}

pub fn score_corpus(
    reports: &[QualityReport],
    config: &ScoreConfig,
) -> Result<CorpusStats, AnalyzerError> {
    if reports.is_empty() {
        return Err(AnalyzerError::EmptyCorpus);
    }
    let count = reports.len();
    let frequencies: BTreeMap<Property, f64> = Property::ALL
        .iter()
        .map(|&p| {
            let hits = reports.iter().filter(|r| r.get(p)).count();
            (p, hits as f64 / count as f64)
        })
        .collect();
    let sum = |set: &[Property]| set.iter().map(|p| frequencies[p]).sum::<f64>();
    let quality_score = sum(&config.positives) - sum(&config.smells);
    Ok(CorpusStats {
        count,
        frequencies,
        quality_score,
    })
}

/// Percentage table, one `<label> <pct>%` row per property followed by the
/// quality score.
pub fn format_table(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Tests {}", stats.count);
    for p in Property::ALL {
        let _ = writeln!(out, "{} {:.1}%", p.label(), stats.frequency(p) * 100.0);
    }
    let _ = writeln!(out, "Quality Score {:.3}", stats.quality_score);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE_TEST: &str = "[TestMethod]\npublic void TestStop()\n{\n\tvar command = new BenchmarkCommand();\n\tcommand.Stop().Wait();\n\tAssert.IsTrue(command.IsStopped());\n}";

    fn tree(body: &str) -> TestSyntaxTree {
        parse_test_method(&format!(
            "[TestMethod]\npublic void TestX()\n{{\n{body}\n}}"
        ))
    }

    #[test]
    fn assertion_detection() {
        assert!(detect_assertion(&tree(
            "Assert.IsTrue(command.IsStopped());"
        )));
        assert!(!detect_assertion(&tree("")));
        assert!(detect_assertion(&tree("CollectionAssert.AreEqual(a, b);")));
        assert!(detect_assertion(&tree("StringAssert.Contains(s, \"x\");")));
        assert!(detect_assertion(&tree(
            "Assert.ThrowsException<ArgumentException>(() => sut.Add(null));"
        )));
        assert!(detect_assertion(&tree(
            "Microsoft.VisualStudio.TestTools.UnitTesting.Assert.IsTrue(ok);"
        )));
        assert!(!detect_assertion(&tree(
            "Console.WriteLine(\"Assert.IsTrue(x)\");"
        )));
        assert!(!detect_assertion(&tree("// Assert.IsTrue(x);")));
        assert!(!detect_assertion(&tree("var Assert = 1;")));
    }

    #[test]
    fn focal_call_detection() {
        assert!(detect_focal_call(&tree("command.Stop().Wait();"), "Stop"));
        assert!(!detect_focal_call(&tree("command.Start();"), "Stop"));
        assert!(detect_focal_call(
            &tree("Assert.AreEqual(0, Add(\"\",0));"),
            "Add"
        ));
        assert!(!detect_focal_call(&tree("command.stop();"), "Stop"));
        assert!(!detect_focal_call(
            &tree("var Stop = 1; Use(Stop);"),
            "Stop"
        ));
        assert!(detect_focal_call(
            &tree("if (x) { await sut.Stop(); }"),
            "Stop"
        ));
    }

    #[test]
    fn comment_detection() {
        assert!(detect_comment(&tree("// arrange\nvar a = 1;")));
        assert!(!detect_comment(&tree("var a = 1;")));
        assert!(detect_comment(&tree("var a = 1; /* x */ a++;")));
    }

    #[test]
    fn descriptive_names() {
        let named = |n: &str| parse_test_method(&format!("public void {n}() {{ }}"));
        assert!(detect_descriptive_name(
            &named("TestAdd_EmptyString_ReturnsZero"),
            "Add"
        ));
        assert!(!detect_descriptive_name(&named("TestStop"), "Stop"));
        assert!(detect_descriptive_name(
            &named("TestStopWhenRunning"),
            "Stop"
        ));
        // remainder "_X1" has two alphanumerics
        assert!(!detect_descriptive_name(&named("TestStop_X1"), "Stop"));
        assert!(detect_descriptive_name(&named("TestStop_Ok2"), "Stop"));
        // only one "Test" prefix is removed
        assert!(detect_descriptive_name(&named("TestTestStop"), "Stop"));
    }

    #[test]
    fn duplicate_assertions() {
        assert!(detect_duplicate_assertion(&tree(
            "Assert.IsTrue(a); Assert.IsTrue(a);"
        )));
        assert!(detect_duplicate_assertion(&tree(
            "Assert.IsTrue(a);\n  Assert.IsTrue( a ) ;"
        )));
        assert!(!detect_duplicate_assertion(&tree("Assert.IsTrue(a);")));
        assert!(!detect_duplicate_assertion(&tree(
            "Assert.IsTrue(a); b++; Assert.IsTrue(a);"
        )));
        assert!(!detect_duplicate_assertion(&tree("a++; a++;")));
        assert!(!detect_duplicate_assertion(&tree(
            "Assert.IsTrue(a); Assert.IsTrue(b);"
        )));
        assert!(detect_duplicate_assertion(&tree(
            "if (x) { Assert.IsTrue(a); Assert.IsTrue(a); }"
        )));
    }

    #[test]
    fn conditional_logic() {
        assert!(detect_conditional_or_exception(&tree("if (x) { a(); }")));
        assert!(detect_conditional_or_exception(&tree(
            "try { a(); } catch { }"
        )));
        assert!(!detect_conditional_or_exception(&tree(
            "Assert.IsTrue(a); Assert.IsFalse(b);"
        )));
        assert!(detect_conditional_or_exception(&tree("var y = x ? 1 : 2;")));
        assert!(detect_conditional_or_exception(&tree(
            "foreach (var i in xs) Use(i);"
        )));
        assert!(detect_conditional_or_exception(&tree(
            "Assert.ThrowsException<E>(() => { while (true) { } });"
        )));
    }

    #[test]
    fn analyze_figure_completion() {
        let r = analyze(FIGURE_TEST, "Stop");
        assert_eq!(
            (
                r.correct_syntax,
                r.has_assertion,
                r.invokes_focal,
                r.has_comment,
                r.descriptive_name,
                r.duplicate_assertion,
                r.conditional_or_exception
            ),
            (true, true, true, false, false, false, false)
        );
        assert!(!r.low_confidence);
        assert_eq!(r.focal_method_name, "Stop");
    }

    #[test]
    fn analyze_broken_and_composed() {
        let r = analyze("public void T() {", "T");
        assert!(!r.correct_syntax);
        assert!(r.low_confidence);

        let r = analyze(
            "[TestMethod] public void T() { if (x) { Assert.IsTrue(a); Assert.IsTrue(a); } }",
            "Run",
        );
        assert!(r.duplicate_assertion && r.conditional_or_exception && r.has_assertion);
    }

    #[test]
    fn score_examples() {
        let perfect = analyze(FIGURE_TEST, "Stop");
        let stats = score_corpus(std::slice::from_ref(&perfect), &ScoreConfig::default()).unwrap();
        assert_eq!(stats.quality_score, 2.0);
        assert_eq!(stats.frequency(Property::HasAssertion), 1.0);
        assert_eq!(stats.frequency(Property::InvokesFocal), 1.0);

        // freq(assert)=.5, freq(focal)=.5, freq(dup)=.1, freq(cond)=0
        let mut reports = Vec::new();
        for i in 0..10 {
            let mut r = perfect.clone();
            r.has_assertion = i < 5;
            r.invokes_focal = i >= 5;
            r.duplicate_assertion = i == 0;
            reports.push(r);
        }
        let stats = score_corpus(&reports, &ScoreConfig::default()).unwrap();
        assert!((stats.quality_score - 0.9).abs() < 1e-12);

        assert_eq!(
            score_corpus(&[], &ScoreConfig::default()),
            Err(AnalyzerError::EmptyCorpus)
        );
    }

    #[test]
    fn table_rows() {
        let perfect = analyze(FIGURE_TEST, "Stop");
        let stats = score_corpus(&[perfect], &ScoreConfig::default()).unwrap();
        let table = format_table(&stats);
        assert!(table.contains("Correct Syntax 100.0%"));
        assert!(table.contains("Duplicate Assertion 0.0%"));
    }

    #[test]
    fn property_names_round_trip() {
        for p in Property::ALL {
            assert_eq!(p.name().parse::<Property>().unwrap(), p);
            assert_eq!(
                serde_json::to_string(&p).unwrap(),
                format!("\"{}\"", p.name())
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn duplicate_implies_assertion(body in "(Assert\\.IsTrue\\(a\\); |a\\+\\+; |if \\(x\\) \\{ |\\} |// c\n){0,12}") {
            let r = analyze(&format!("void T() {{ {body} }}"), "a");
            if r.duplicate_assertion {
                proptest::prop_assert!(r.has_assertion);
            }
        }

        #[test]
        fn block_wrapping_is_transparent(body in "(Assert\\.IsTrue\\(a\\); |Stop\\(\\); |x = c \\? 1 : 2; |try \\{ \\} catch \\{ \\} |// n\n){0,8}") {
            let plain = analyze(&format!("void TestStop_Wraps() {{ {body} }}"), "Stop");
            let wrapped = analyze(&format!("void TestStop_Wraps() {{ {{ {body} }} }}"), "Stop");
            proptest::prop_assert_eq!(plain, wrapped);
        }
    }
}
