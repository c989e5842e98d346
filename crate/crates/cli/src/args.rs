use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "testqual",
    version,
    about = "Quality analysis and curation of generated C# unit tests"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat key/value TOML file with pipeline settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file (a directory for `split`). Defaults to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the quality analyzer over corpus records.
    Analyze {
        input: PathBuf,
        /// Field holding the focal method name.
        #[arg(long, default_value = "focal_method")]
        focal_field: String,
        /// Field holding the test source.
        #[arg(long, default_value = "test")]
        test_field: String,
    },
    /// Frequency table and quality score over quality reports.
    Report { input: PathBuf },
    /// Cut raw completions down to one test method.
    Truncate { input: PathBuf },
    /// Build budgeted prompts from focal files.
    Prompt {
        /// JSONL prompt requests, or a single `.cs` file.
        input: PathBuf,
        /// Focal method, required for a `.cs` input.
        #[arg(long)]
        method: Option<String>,
        /// Path written into the prompt; defaults to the input path.
        #[arg(long)]
        focal_path: Option<String>,
    },
    /// Label records with rewards.
    Reward {
        input: PathBuf,
        /// `individual:<property>` or `combined:<p1>,<p2>,...`.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Balance labeled records into low, high and syntax-error classes.
    Resample { input: PathBuf },
    /// Keep golden records and drop duplicates.
    Golden { input: PathBuf },
    /// Repository-disjoint splits written into the `--out` directory.
    Split {
        input: PathBuf,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        val_fraction: Option<f64>,
        /// Split the training share into sft, rm and pm parts.
        #[arg(long)]
        three_way: bool,
    },
    /// Uniform sample of lines without replacement.
    Subsample {
        input: PathBuf,
        #[arg(short = 'n', long)]
        count: usize,
    },
    /// PPO on the tabular toy policy.
    TrainToy {
        /// Reward scheme, as for `reward`.
        #[arg(long)]
        scheme: Option<String>,
        /// Start from this policy checkpoint instead of the uniform policy.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Use a trained reward model instead of the analyzer.
        #[arg(long)]
        reward_model: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        /// Training metrics JSONL.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        focal: Option<String>,
    },
    /// Sample completions from a toy policy as corpus records.
    Sample {
        #[arg(long)]
        policy: PathBuf,
        #[arg(short = 'n', long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        focal: Option<String>,
    },
    /// Fit the linear reward model on labeled records.
    TrainRm {
        input: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

impl Command {
    /// Input files that must exist before the run starts.
    pub fn inputs(&self) -> Vec<&PathBuf> {
        use Command::*;
        match self {
            Analyze { input, .. }
            | Report { input }
            | Truncate { input }
            | Prompt { input, .. }
            | Reward { input, .. }
            | Resample { input }
            | Golden { input }
            | Split { input, .. }
            | Subsample { input, .. }
            | TrainRm { input, .. } => vec![input],
            TrainToy {
                init, reward_model, ..
            } => init.iter().chain(reward_model.iter()).collect(),
            Sample { policy, .. } => vec![policy],
        }
    }
}
