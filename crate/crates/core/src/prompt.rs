//! Prompt construction with adaptive focal context.
//!
//! Four context levels, each derived from the previous one by deleting text
//! so their lengths never increase:
//!
//! 1. the whole focal file;
//! 2. the focal class, other methods cut down to `signature;`;
//! 3. level 2 without fields, properties and member comments;
//! 4. the class declaration with the focal method only.

use serde::{Deserialize, Serialize};

use crate::error::PromptError;
use crate::parser::{parse_focal_file, ClassNode, FocalFileTree, Member, MemberKind, Span};

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetConfig {
    pub prompt_token_budget: usize,
    pub completion_token_budget: usize,
    pub chars_per_token: usize,
    pub context_window: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            prompt_token_budget: 1536,
            completion_token_budget: 512,
            chars_per_token: 4,
            context_window: 2048,
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.prompt_token_budget == 0
            || self.completion_token_budget == 0
            || self.chars_per_token == 0
            || self.context_window == 0
        {
            return Err(PromptError::InvalidBudget(
                "all budgets must be positive".into(),
            ));
        }
        if self.prompt_token_budget + self.completion_token_budget > self.context_window {
            return Err(PromptError::InvalidBudget(format!(
                "prompt ({}) + completion ({}) exceeds context window ({})",
                self.prompt_token_budget, self.completion_token_budget, self.context_window
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub focal_path: String,
    pub test_path: String,
    pub focal_method: String,
    pub context_level: u8,
    pub prompt_text: String,
    pub estimated_tokens: usize,
}

/// `ceil(chars / chars_per_token)`.
pub fn estimate_tokens(text: &str, cfg: &BudgetConfig) -> usize {
    text.chars().count().div_ceil(cfg.chars_per_token.max(1))
}

pub fn prompt_hint(focal_method: &str) -> String {
    format!("[TestMethod]\npublic void Test{focal_method}()")
}

/// Same directory, file name prefixed with `Test`.
pub fn test_path_for(focal_path: &str) -> String {
    match focal_path.rfind(['/', '\\']) {
        Some(i) => format!("{}Test{}", &focal_path[..=i], &focal_path[i + 1..]),
        None => format!("Test{focal_path}"),
    }
}

pub fn assemble_prompt(
    focal_path: &str,
    context: &str,
    test_path: &str,
    focal_method: &str,
) -> String {
    format!(
        "{focal_path}:\n{context}\n{test_path}:\n{}",
        prompt_hint(focal_method)
    )
}

pub fn render_level(tree: &FocalFileTree, focal: &str, level: u8) -> Result<String, PromptError> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        return Err(PromptError::InvalidLevel(level));
    }
    let (class, method) = tree
        .find_method(focal)
        .ok_or_else(|| PromptError::FocalNotFound(focal.to_string()))?;
    if level == 1 {
        return Ok(tree.source.clone());
    }
    let mut edits = Vec::new();
    class_edits(class, Some(method), level, &tree.source, &mut edits);
    edits.sort_by_key(|(span, _)| span.start);
    Ok(apply_edits(&tree.source, class.span, &edits))
}

fn class_edits(
    class: &ClassNode,
    focal: Option<&Member>,
    level: u8,
    src: &str,
    edits: &mut Vec<(Span, &'static str)>,
) {
    let mut prev_end = class.open_brace + 1;
    for m in &class.members {
        let is_focal = focal.is_some_and(|f| f.span == m.span);
        let with_gap = Span::new(prev_end, m.span.end);
        prev_end = m.span.end;
        if is_focal {
            continue;
        }
        if level == 4 {
            edits.push((with_gap, ""));
            continue;
        }
        match &m.kind {
            MemberKind::Method | MemberKind::Constructor => {
                if let Some(sig) = m.signature {
                    let tail = Span::new(sig.end, m.span.end);
                    if tail.text(src) != ";" {
                        edits.push((tail, ";"));
                    }
                }
            }
            MemberKind::Field | MemberKind::Property | MemberKind::Comment if level >= 3 => {
                edits.push((with_gap, ""));
            }
            MemberKind::Type(inner) => class_edits(inner, None, level, src, edits),
            _ => {}
        }
    }
}

fn apply_edits(src: &str, within: Span, edits: &[(Span, &str)]) -> String {
    let mut out = String::with_capacity(within.len());
    let mut pos = within.start;
    for (span, replacement) in edits {
        out.push_str(&src[pos..span.start]);
        out.push_str(replacement);
        pos = span.end;
    }
    out.push_str(&src[pos..within.end]);
    out
}

/// Tries levels 1 to 4 and returns the first prompt within the budget.
pub fn build_prompt(
    tree: &FocalFileTree,
    focal: &str,
    focal_path: &str,
    cfg: &BudgetConfig,
) -> Result<PromptRecord, PromptError> {
    cfg.validate()?;
    let test_path = test_path_for(focal_path);
    let mut tokens = 0;
    for level in MIN_LEVEL..=MAX_LEVEL {
        let context = render_level(tree, focal, level)?;
        let prompt_text = assemble_prompt(focal_path, &context, &test_path, focal);
        tokens = estimate_tokens(&prompt_text, cfg);
        if tokens <= cfg.prompt_token_budget {
            return Ok(PromptRecord {
                focal_path: focal_path.to_string(),
                test_path,
                focal_method: focal.to_string(),
                context_level: level,
                prompt_text,
                estimated_tokens: tokens,
            });
        }
    }
    Err(PromptError::PromptTooLong {
        tokens,
        budget: cfg.prompt_token_budget,
    })
}

pub fn build_prompt_from_source(
    source: &str,
    focal: &str,
    focal_path: &str,
    cfg: &BudgetConfig,
) -> Result<PromptRecord, PromptError> {
    let tree = parse_focal_file(source)?;
    build_prompt(&tree, focal, focal_path, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE_FILE: &str = "using System;
using System.Linq;
using System.Threading.Tasks;

public class BenchmarkCommand : ICommand
{
\tprivate WriteBenchmarkCommand _writeBenchmark = new WriteBenchmarkCommand();
\tprivate ReadBenchmarkCommand _readBenchmark = new ReadBenchmarkCommand();

\t// timing state
\tpublic int Runs { get; set; }

\tpublic async Task Start(int count)
\t{
\t\tawait _writeBenchmark.Start(count);
\t}

\tpublic async Task Stop()
\t{
\t\tawait _writeBenchmark.Stop();
\t\tawait _readBenchmark.Stop();
\t}

\tpublic bool IsStopped() => _writeBenchmark.Done;
}
";

    fn tree() -> FocalFileTree {
        parse_focal_file(FIGURE_FILE).unwrap()
    }

    const STOP: &str = "public async Task Stop()\n\t{\n\t\tawait _writeBenchmark.Stop();\n\t\tawait _readBenchmark.Stop();\n\t}";

    #[test]
    fn token_estimates() {
        let cfg = BudgetConfig::default();
        assert_eq!(estimate_tokens(&"x".repeat(6144), &cfg), 1536);
        assert_eq!(estimate_tokens("", &cfg), 0);
        assert_eq!(estimate_tokens("0123456789", &cfg), 3);
        // characters, not bytes
        assert_eq!(estimate_tokens("ééééé", &cfg), 2);
    }

    #[test]
    fn level_one_is_the_file() {
        assert_eq!(render_level(&tree(), "Stop", 1).unwrap(), FIGURE_FILE);
    }

    #[test]
    fn level_two_abbreviates_other_methods() {
        let l2 = render_level(&tree(), "Stop", 2).unwrap();
        assert!(l2.starts_with("public class BenchmarkCommand : ICommand\n{"));
        assert!(l2.contains(STOP));
        assert!(l2.contains("\tpublic async Task Start(int count);\n"));
        assert!(l2.contains("\tpublic bool IsStopped();\n"));
        assert!(l2.contains("_readBenchmark = new ReadBenchmarkCommand();"));
        assert!(l2.contains("// timing state"));
        assert!(!l2.contains("using System"));
    }

    #[test]
    fn level_three_drops_fields_and_comments() {
        let l3 = render_level(&tree(), "Stop", 3).unwrap();
        assert!(!l3.contains("_readBenchmark = new"));
        assert!(!l3.contains("timing state"));
        assert!(!l3.contains("Runs"));
        assert!(l3.contains("public async Task Start(int count);"));
        assert!(l3.contains(STOP));
    }

    #[test]
    fn level_four_is_signature_and_focal() {
        let l4 = render_level(&tree(), "Stop", 4).unwrap();
        assert_eq!(
            l4,
            format!("public class BenchmarkCommand : ICommand\n{{\n\n\t{STOP}\n}}")
        );
    }

    #[test]
    fn levels_are_monotone() {
        let t = tree();
        let lens: Vec<usize> = (1..=4)
            .map(|l| render_level(&t, "Stop", l).unwrap().len())
            .collect();
        assert!(lens.windows(2).all(|w| w[0] >= w[1]), "{lens:?}");

        let single = parse_focal_file("class A { void F() { } }").unwrap();
        let lens: Vec<usize> = (1..=4)
            .map(|l| render_level(&single, "F", l).unwrap().len())
            .collect();
        assert!(lens.windows(2).all(|w| w[0] >= w[1]), "{lens:?}");
    }

    #[test]
    fn missing_focal_and_bad_level() {
        assert_eq!(
            render_level(&tree(), "Nope", 2),
            Err(PromptError::FocalNotFound("Nope".into()))
        );
        assert_eq!(
            render_level(&tree(), "Stop", 5),
            Err(PromptError::InvalidLevel(5))
        );
    }

    #[test]
    fn nested_class_methods_are_abbreviated() {
        let src = "class Outer {\n  void Focal() { A(); }\n  class Inner {\n    int f;\n    void G() { B(); }\n  }\n}";
        let l2 = render_level(&parse_focal_file(src).unwrap(), "Focal", 2).unwrap();
        assert!(l2.contains("void G();"));
        assert!(l2.contains("int f;"));
        let l3 = render_level(&parse_focal_file(src).unwrap(), "Focal", 3).unwrap();
        assert!(!l3.contains("int f;"));
    }

    #[test]
    fn paths_and_hint() {
        assert_eq!(
            test_path_for("src/Commands/BenchmarkCommand.cs"),
            "src/Commands/TestBenchmarkCommand.cs"
        );
        assert_eq!(test_path_for("A.cs"), "TestA.cs");
        let rec = build_prompt(
            &tree(),
            "Stop",
            "src/Commands/BenchmarkCommand.cs",
            &BudgetConfig::default(),
        )
        .unwrap();
        assert_eq!(rec.context_level, 1);
        assert!(rec
            .prompt_text
            .starts_with("src/Commands/BenchmarkCommand.cs:\nusing System;"));
        assert!(rec.prompt_text.ends_with(
            "}\n\nsrc/Commands/TestBenchmarkCommand.cs:\n[TestMethod]\npublic void TestStop()"
        ));
        assert_eq!(
            rec.estimated_tokens,
            estimate_tokens(&rec.prompt_text, &BudgetConfig::default())
        );
    }

    #[test]
    fn straddling_budget_picks_minimal_level() {
        let t = tree();
        let path = "B.cs";
        let prompt_len = |level| {
            let ctx = render_level(&t, "Stop", level).unwrap();
            assemble_prompt(path, &ctx, &test_path_for(path), "Stop")
                .chars()
                .count()
        };
        for level in 1..=4u8 {
            let cfg = BudgetConfig {
                prompt_token_budget: prompt_len(level),
                chars_per_token: 1,
                completion_token_budget: 1,
                context_window: 100_000,
            };
            let rec = build_prompt(&t, "Stop", path, &cfg).unwrap();
            assert_eq!(rec.context_level, level);
            if level < 4 {
                let tight = BudgetConfig {
                    prompt_token_budget: prompt_len(level + 1),
                    ..cfg.clone()
                };
                assert!(
                    build_prompt(&t, "Stop", path, &tight)
                        .unwrap()
                        .context_level
                        > level
                );
            }
        }
    }

    #[test]
    fn pathological_method_is_too_long() {
        let body = "x++;".repeat(25_000);
        let src = format!("class Big {{ void Huge() {{ {body} }} }}");
        let err =
            build_prompt_from_source(&src, "Huge", "Big.cs", &BudgetConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            PromptError::PromptTooLong { budget: 1536, .. }
        ));
    }

    #[test]
    fn invalid_budgets() {
        let cfg = BudgetConfig {
            prompt_token_budget: 2000,
            ..BudgetConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(PromptError::InvalidBudget(_))));
        let zero = BudgetConfig {
            chars_per_token: 0,
            ..BudgetConfig::default()
        };
        assert!(zero.validate().is_err());
    }
}
