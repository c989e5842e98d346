//! Inputs shared by the benchmarks in `benches/`.

pub const FOCAL: &str = "Stop";

/// A typical generated test with a comment, a branch and assertions.
pub const TEST: &str = r#"[TestMethod]
public void TestStopSetsFlagWhenRunning()
{
	// arrange
	var command = new BenchmarkCommand("bench", timeout: 30);
	command.Start();
	if (command.IsRunning)
	{
		command.Stop();
	}
	Assert.IsTrue(command.IsStopped());
	Assert.AreEqual("bench", command.Name);
}"#;

/// A focal class with `methods` extra members of `body` statements each.
pub fn focal_source(methods: usize, body: usize) -> String {
    let mut s = String::from("using System;\n\nnamespace Bench\n{\n\tpublic class BenchmarkCommand\n\t{\n\t\tprivate bool _running;\n");
    for m in 0..methods {
        s += &format!(
            "\t\t/// <summary>Helper {m}.</summary>\n\t\tpublic int Helper{m}(int x)\n\t\t{{\n"
        );
        for i in 0..body {
            s += &format!("\t\t\tx = x * 7 + {i};\n");
        }
        s += "\t\t\treturn x;\n\t\t}\n";
    }
    s += "\t\tpublic void Stop()\n\t\t{\n\t\t\t_running = false;\n\t\t}\n\t}\n}\n";
    s
}

/// Completion text that runs past the first test into a second one.
pub fn long_completion() -> String {
    let body = TEST.split_once('\n').map(|(_, b)| b).unwrap_or(TEST);
    let rest = body.split_once(")\n").map(|(_, b)| b).unwrap_or(body);
    format!("\n{rest}\n\n{TEST}\n// trailing text\n")
}
