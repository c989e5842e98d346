//! Toy code vocabulary and rendering of sampled token sequences into test
//! methods the analyzer can score.

use serde::{Deserialize, Serialize};

use super::policy::{START, STOP};
use crate::prompt::prompt_hint;

/// Statement-sized chunks. An assertion needs the bigram `Assert`
/// followed by a `.Method(...);` tail. Every control-flow chunk is a whole
/// statement, so no token can unbalance the method's braces.
pub const TOY_TOKENS: &[&str] = &[
    // assertion head and tails
    "Assert",
    ".IsTrue(sut.IsStopped());",
    ".AreEqual(0, count);",
    ".IsNotNull(sut);",
    ".IsFalse(ok);",
    ".AreNotEqual(1, count);",
    // focal calls
    "sut.Stop();",
    "var stopped = sut.Stop();",
    // setup and noise
    "var sut = new BenchmarkCommand();",
    "var count = 0;",
    "count++;",
    "sut.Start();",
    "sut.Reset();",
    "var log = new List<string>();",
    "log.Add(\"started\");",
    "Console.WriteLine(count);",
    "var name = sut.ToString();",
    "await Task.Delay(10);",
    "var options = new Options();",
    "options.Verbose = true;",
    "sut.Configure(options);",
    "count = log.Count;",
    "GC.Collect();",
    "Thread.Sleep(5);",
    "sut.Dispose();",
    "var ok = sut.IsStopped();",
    // comments
    "// arrange",
    "// act",
    "// assert",
    // control flow and exception handling
    "if (count > 0) count++;",
    "if (sut.IsStopped()) return;",
    "while (count < 3) count++;",
    "for (var i = 0; i < 3; i++) sut.Start();",
    "foreach (var item in log) Console.WriteLine(item);",
    "try { sut.Stop(); } catch (Exception) { }",
    "var flag = count > 0 ? 1 : 2;",
];

pub fn toy_vocabulary() -> Vec<String> {
    let mut v = vec!["<s>".to_string(), "</s>".to_string()];
    v.extend(TOY_TOKENS.iter().map(|t| t.to_string()));
    v
}

/// Renders samples as test methods for one focal method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTask {
    pub focal_method: String,
    pub hint: String,
}

impl ToyTask {
    pub fn new(focal_method: &str) -> Self {
        ToyTask {
            focal_method: focal_method.to_string(),
            hint: prompt_hint(focal_method),
        }
    }

    /// `hint { tokens one per line }`.
    pub fn render(&self, vocabulary: &[String], tokens: &[usize]) -> String {
        let mut out = self.hint.clone();
        out.push_str("\n{\n");
        for &t in tokens {
            if t == START || t == STOP {
                continue;
            }
            out.push('\t');
            out.push_str(&vocabulary[t]);
            out.push('\n');
        }
        out.push('}');
        out
    }
}

impl Default for ToyTask {
    fn default() -> Self {
        ToyTask::new("Stop")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::analyze;

    fn idx(token: &str) -> usize {
        toy_vocabulary().iter().position(|t| t == token).unwrap()
    }

    #[test]
    fn vocabulary_shape() {
        let v = toy_vocabulary();
        assert!(v.len() <= 200);
        assert_eq!(v[START], "<s>");
        assert_eq!(v[STOP], "</s>");
        let mut sorted = v.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), v.len());
    }

    #[test]
    fn rendered_samples_analyze_as_expected() {
        let task = ToyTask::default();
        let v = toy_vocabulary();
        let good = task.render(
            &v,
            &[
                idx("var sut = new BenchmarkCommand();"),
                idx("sut.Stop();"),
                idx("Assert"),
                idx(".IsTrue(sut.IsStopped());"),
            ],
        );
        let r = analyze(&good, "Stop");
        assert!(
            r.correct_syntax && r.has_assertion && r.invokes_focal && !r.conditional_or_exception
        );

        let split = task.render(
            &v,
            &[
                idx("Assert"),
                idx("count++;"),
                idx(".IsTrue(sut.IsStopped());"),
            ],
        );
        assert!(!analyze(&split, "Stop").has_assertion);

        let empty = task.render(&v, &[]);
        let r = analyze(&empty, "Stop");
        assert!(r.correct_syntax && !r.has_assertion);

        let cond = task.render(&v, &[idx("if (count > 0) count++;"), idx("count++;")]);
        let r = analyze(&cond, "Stop");
        assert!(r.correct_syntax && r.conditional_or_exception);

        let dup = task.render(
            &v,
            &[
                idx("Assert"),
                idx(".IsFalse(ok);"),
                idx("Assert"),
                idx(".IsFalse(ok);"),
            ],
        );
        assert!(analyze(&dup, "Stop").duplicate_assertion);
    }
}
