//! `testqual`: every pipeline stage as a subcommand over JSONL files.
//!
//! Exit codes: 0 success, 1 data errors (including per-line error
//! records), 2 usage errors.

mod args;
mod commands;
mod config;
mod jsonl;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use commands::*;
use config::PipelineConfig;

/// Bad flags, bad config, missing inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Input that could not be processed.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for DataError {}

const DEFAULT_FOCAL: &str = "Stop";
const DEFAULT_RM_EPOCHS: usize = 2000;
const DEFAULT_RM_LR: f64 = 0.05;

fn usage(e: anyhow::Error) -> anyhow::Error {
    UsageError(format!("{e:#}")).into()
}

fn run(cli: Cli) -> Result<commands::Failures> {
    for path in cli.command.inputs() {
        if path.as_os_str() != "-" && !path.exists() {
            return Err(UsageError(format!("input {} does not exist", path.display())).into());
        }
    }
    let cfg = PipelineConfig::load(cli.common.config.as_deref()).map_err(usage)?;
    let seed = cli.common.seed.or(cfg.seed).unwrap_or(0);
    let out = cli.common.out.as_deref();
    let focal = |flag: Option<String>| {
        flag.or_else(|| cfg.focal_method.clone())
            .unwrap_or_else(|| DEFAULT_FOCAL.to_string())
    };

    match cli.command {
        Command::Analyze {
            input,
            focal_field,
            test_field,
        } => analyze_cmd(&input, out, &focal_field, &test_field),
        Command::Report { input } => report_cmd(&input, out, &cfg.score().map_err(usage)?),
        Command::Truncate { input } => truncate_cmd(&input, out),
        Command::Prompt {
            input,
            method,
            focal_path,
        } => prompt_cmd(
            &input,
            out,
            method.as_deref(),
            focal_path.as_deref(),
            &cfg.budget(),
        ),
        Command::Reward { input, scheme } => {
            let scheme = cfg.scheme(scheme.as_deref()).map_err(usage)?;
            reward_cmd(&input, out, &scheme)
        }
        Command::Resample { input } => resample_cmd(&input, out, seed),
        Command::Golden { input } => golden_cmd(&input, out),
        Command::Split {
            input,
            test_fraction,
            val_fraction,
            three_way,
        } => {
            let mut spec = cfg.split_spec(seed);
            spec.test_fraction = test_fraction.unwrap_or(spec.test_fraction);
            spec.val_fraction = val_fraction.unwrap_or(spec.val_fraction);
            spec.rl_three_way |= three_way;
            split_cmd(&input, out, &spec)
        }
        Command::Subsample { input, count } => subsample_cmd(&input, out, count, seed),
        Command::TrainToy {
            scheme,
            init,
            reward_model,
            episodes,
            beta,
            metrics,
            focal: focal_flag,
        } => {
            let mut train = cfg.train(seed).map_err(usage)?;
            train.episodes = episodes.unwrap_or(train.episodes);
            train.beta = beta.unwrap_or(train.beta);
            let scheme = match (&scheme, &reward_model) {
                (None, Some(_)) => None,
                _ => Some(cfg.scheme(scheme.as_deref()).map_err(usage)?),
            };
            // checkpoints follow the trained objective unless the config names a score
            if let (Some(s), false) = (&scheme, cfg.score_is_set()) {
                train.checkpoint = s.score_config();
            }
            let run = ToyRun {
                scheme,
                init: init.as_deref(),
                reward_model: reward_model.as_deref(),
                metrics: metrics.as_deref(),
                focal: focal(focal_flag),
            };
            train_toy_cmd(run, out, &train)
        }
        Command::Sample {
            policy,
            count,
            focal: focal_flag,
        } => sample_cmd(
            &policy,
            out,
            count,
            &focal(focal_flag),
            &cfg.train(seed).map_err(usage)?,
        ),
        Command::TrainRm { input, epochs } => train_rm_cmd(
            &input,
            out,
            epochs.or(cfg.rm_epochs).unwrap_or(DEFAULT_RM_EPOCHS),
            cfg.rm_learning_rate.unwrap_or(DEFAULT_RM_LR),
            seed,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("error: {n} input lines failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
