use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;
use testqual_core::curation::is_golden_record;
use testqual_core::prompt::build_prompt_from_source;
use testqual_core::quality::format_table;
use testqual_core::reward::label_record;
use testqual_core::rl::{
    analyzer_reward, sample_completion, toy_vocabulary, train_reward_model, train_toy_policy,
    LinearRewardModel, PolicyTable, ToyTask,
};
use testqual_core::{
    analyze, resample_balanced, score_corpus, split_by_repository, subsample, truncate_completion,
    BudgetConfig, CorpusRecord, LabeledRecord, QualityReport, RawCompletion, RecordMeta,
    RecordSource, RewardScheme, ScoreConfig, SplitSpec,
};

use crate::jsonl::{self, *};
use crate::DataError;

/// Number of input lines that produced an error record.
pub type Failures = usize;

fn write_results(
    out: &mut dyn Write,
    batch: &[(usize, String)],
    results: Vec<Result<Option<String>, String>>,
) -> Result<Failures> {
    let mut failures = 0;
    for ((n, _), r) in batch.iter().zip(results) {
        match r {
            Ok(Some(line)) => writeln!(out, "{line}")?,
            Ok(None) => {}
            Err(e) => {
                failures += 1;
                writeln!(out, "{}", error_line(*n, &e))?;
            }
        }
    }
    Ok(failures)
}

/// Parallel per-line map with output in input order.
fn map_lines(
    input: &Path,
    out: Option<&Path>,
    f: impl Fn(&str) -> Result<Option<String>, String> + Sync,
) -> Result<Failures> {
    let mut w = open_output(out)?;
    let mut failures = 0;
    for_each_batch(open_input(input)?, |batch| {
        let results: Vec<_> = batch.par_iter().map(|(_, line)| f(line)).collect();
        failures += write_results(&mut w, &batch, results)?;
        Ok(())
    })?;
    w.flush()?;
    Ok(failures)
}

fn tag<T: serde::Serialize>(schema: &str, body: &T) -> Result<Option<String>, String> {
    jsonl::tagged(schema, body)
        .map(Some)
        .map_err(|e| e.to_string())
}

fn str_field<'v>(v: &'v Value, field: &str) -> Result<&'v str, String> {
    v.get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string field `{field}`"))
}

pub fn analyze_cmd(
    input: &Path,
    out: Option<&Path>,
    focal_field: &str,
    test_field: &str,
) -> Result<Failures> {
    map_lines(input, out, |line| {
        let v = parse_value(line, &[CORPUS_RECORD])?;
        let report = analyze(str_field(&v, test_field)?, str_field(&v, focal_field)?);
        tag(QUALITY_REPORT, &report)
    })
}

pub fn report_cmd(input: &Path, out: Option<&Path>, score: &ScoreConfig) -> Result<Failures> {
    let mut reports: Vec<QualityReport> = Vec::new();
    let mut skipped = 0usize;
    for_each_batch(open_input(input)?, |batch| {
        for (n, line) in batch {
            let v = parse_value(&line, &[QUALITY_REPORT, ERROR])
                .map_err(|e| DataError(format!("line {n}: {e}")))?;
            if schema_of(&v) == Some(ERROR) {
                skipped += 1;
                continue;
            }
            let r = serde_json::from_value(v)
                .map_err(|e| DataError(format!("line {n}: invalid report: {e}")))?;
            reports.push(r);
        }
        Ok(())
    })?;
    if skipped > 0 {
        eprintln!("skipped {skipped} error records");
    }
    let stats = score_corpus(&reports, score).map_err(|e| DataError(e.to_string()))?;
    let mut w = open_output(out)?;
    write!(w, "{}", format_table(&stats))?;
    writeln!(w, "{}", tagged(CORPUS_STATS, &stats)?)?;
    w.flush()?;
    Ok(0)
}

#[derive(Deserialize)]
struct CompletionLine {
    #[serde(default)]
    prompt: String,
    #[serde(flatten)]
    raw: RawCompletion,
    #[serde(flatten)]
    meta: RecordMeta,
}

/// Raw completions become corpus records; corpus records are cut again,
/// which leaves an already cut test unchanged.
pub fn truncate_cmd(input: &Path, out: Option<&Path>) -> Result<Failures> {
    map_lines(input, out, |line| {
        let v = parse_value(line, &[COMPLETION, CORPUS_RECORD])?;
        let record = if v.get("completion_text").is_some() {
            let c: CompletionLine =
                serde_json::from_value(v).map_err(|e| format!("invalid completion: {e}"))?;
            testqual_core::assemble_record(&c.prompt, &c.raw, &c.meta)
        } else {
            let mut r: CorpusRecord =
                serde_json::from_value(v).map_err(|e| format!("invalid record: {e}"))?;
            if !r.test.is_empty() {
                r.test = truncate_completion(&RawCompletion::new("", r.test));
            }
            r
        };
        tag(CORPUS_RECORD, &record)
    })
}

#[derive(Deserialize)]
struct PromptRequest {
    focal_path: String,
    focal_source: String,
    focal_method: String,
}

pub fn prompt_cmd(
    input: &Path,
    out: Option<&Path>,
    method: Option<&str>,
    focal_path: Option<&str>,
    budget: &BudgetConfig,
) -> Result<Failures> {
    budget
        .validate()
        .map_err(|e| crate::UsageError(e.to_string()))?;
    if input.extension().is_some_and(|e| e == "cs") {
        let method = method
            .ok_or_else(|| crate::UsageError("--method is required for a .cs input".into()))?;
        let source =
            fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        let path = focal_path
            .map(str::to_string)
            .unwrap_or_else(|| input.display().to_string());
        let rec = build_prompt_from_source(&source, method, &path, budget)
            .map_err(|e| DataError(e.to_string()))?;
        let mut w = open_output(out)?;
        writeln!(w, "{}", tagged(PROMPT_RECORD, &rec)?)?;
        w.flush()?;
        return Ok(0);
    }
    map_lines(input, out, |line| {
        let req: PromptRequest = parse_line(line, &[PROMPT_REQUEST])?;
        let rec = build_prompt_from_source(
            &req.focal_source,
            &req.focal_method,
            &req.focal_path,
            budget,
        )
        .map_err(|e| e.to_string())?;
        tag(PROMPT_RECORD, &rec)
    })
}

/// Corpus records, or labeled records whose inner record is relabeled.
pub fn reward_cmd(input: &Path, out: Option<&Path>, scheme: &RewardScheme) -> Result<Failures> {
    map_lines(input, out, |line| {
        let mut v = parse_value(line, &[CORPUS_RECORD, LABELED_RECORD])?;
        if let Some(inner) = v.get_mut("record") {
            v = inner.take();
        }
        let record: CorpusRecord =
            serde_json::from_value(v).map_err(|e| format!("invalid record: {e}"))?;
        tag(LABELED_RECORD, &label_record(&record, scheme))
    })
}

fn write_all<T: serde::Serialize>(out: Option<&Path>, schema: &str, items: &[T]) -> Result<()> {
    let mut w = open_output(out)?;
    for item in items {
        writeln!(w, "{}", tagged(schema, item)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn resample_cmd(input: &Path, out: Option<&Path>, seed: u64) -> Result<Failures> {
    let labeled: Vec<LabeledRecord> = read_all(input, &[LABELED_RECORD])?;
    let balanced = resample_balanced(&labeled, seed).map_err(|e| DataError(e.to_string()))?;
    write_all(out, LABELED_RECORD, &balanced)?;
    Ok(0)
}

/// Streaming golden filter; the first copy of each `(prompt, test)` wins.
pub fn golden_cmd(input: &Path, out: Option<&Path>) -> Result<Failures> {
    let mut w = open_output(out)?;
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut failures = 0;
    for_each_batch(open_input(input)?, |batch| {
        let kept: Vec<Result<Option<CorpusRecord>, String>> = batch
            .par_iter()
            .map(|(_, line)| {
                let r: CorpusRecord = parse_line(line, &[CORPUS_RECORD])?;
                Ok(is_golden_record(&r).then_some(r))
            })
            .collect();
        let mut lines = Vec::with_capacity(kept.len());
        for r in kept {
            lines.push(match r {
                Ok(Some(rec)) if seen.insert((rec.prompt.clone(), rec.test.clone())) => {
                    tag(CORPUS_RECORD, &rec)
                }
                Ok(_) => Ok(None),
                Err(e) => Err(e),
            });
        }
        failures += write_results(&mut w, &batch, lines)?;
        Ok(())
    })?;
    w.flush()?;
    Ok(failures)
}

pub fn split_cmd(input: &Path, out: Option<&Path>, spec: &SplitSpec) -> Result<Failures> {
    let dir = out.ok_or_else(|| crate::UsageError("split needs --out <directory>".into()))?;
    spec.validate()
        .map_err(|e| crate::UsageError(e.to_string()))?;
    let records: Vec<CorpusRecord> = read_all(input, &[CORPUS_RECORD])?;
    let splits = split_by_repository(&records, spec).map_err(|e| DataError(e.to_string()))?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, part) in &splits.parts {
        write_all(
            Some(&dir.join(format!("{name}.jsonl"))),
            CORPUS_RECORD,
            part,
        )?;
    }
    let manifest = serde_json::to_string_pretty(&splits.manifest)?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;
    for (name, count) in &splits.manifest.counts {
        eprintln!("{name} {count}");
    }
    Ok(0)
}

/// Lines are copied verbatim.
pub fn subsample_cmd(input: &Path, out: Option<&Path>, n: usize, seed: u64) -> Result<Failures> {
    let mut lines = Vec::new();
    for_each_batch(open_input(input)?, |batch| {
        lines.extend(batch.into_iter().map(|(_, l)| l));
        Ok(())
    })?;
    let mut w = open_output(out)?;
    for line in subsample(&lines, n, seed) {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(0)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| DataError(format!("{}: {e}", path.display())).into())
}

pub struct ToyRun<'a> {
    pub scheme: Option<RewardScheme>,
    pub init: Option<&'a Path>,
    pub reward_model: Option<&'a Path>,
    pub metrics: Option<&'a Path>,
    pub focal: String,
}

pub fn train_toy_cmd(
    run: ToyRun<'_>,
    out: Option<&Path>,
    cfg: &testqual_core::rl::TrainConfig,
) -> Result<Failures> {
    cfg.validate()
        .map_err(|e| crate::UsageError(e.to_string()))?;
    let init: PolicyTable = match run.init {
        Some(p) => read_json(p)?,
        None => PolicyTable::uniform(toy_vocabulary())?,
    };
    PolicyTable::new(init.vocabulary.clone(), init.logits.clone())
        .map_err(|e| DataError(format!("invalid policy: {e}")))?;
    let task = ToyTask::new(&run.focal);
    let (policy, metrics) = match (run.reward_model, run.scheme) {
        (Some(path), _) => {
            let model: LinearRewardModel = read_json(path)?;
            train_toy_policy(&init, &task, move |t: &str| model.predict(t), cfg)?
        }
        (None, Some(scheme)) => train_toy_policy(
            &init,
            &task,
            analyzer_reward(scheme, run.focal.clone()),
            cfg,
        )?,
        (None, None) => {
            return Err(
                crate::UsageError("train-toy needs --scheme or --reward-model".into()).into(),
            )
        }
    };
    if let Some(path) = run.metrics {
        write_all(Some(path), EPOCH_METRICS, &metrics.epochs)?;
    }
    let mut w = open_output(out)?;
    writeln!(w, "{}", serde_json::to_string(&policy)?)?;
    w.flush()?;
    eprintln!(
        "best epoch {} (episode {}), score {:.3}",
        metrics.best_epoch, metrics.epochs[metrics.best_epoch].episodes, metrics.best_score
    );
    Ok(0)
}

pub fn sample_cmd(
    policy_path: &Path,
    out: Option<&Path>,
    n: usize,
    focal: &str,
    cfg: &testqual_core::rl::TrainConfig,
) -> Result<Failures> {
    let params = cfg.sampling();
    params
        .validate()
        .map_err(|e| crate::UsageError(e.to_string()))?;
    let policy: PolicyTable = read_json(policy_path)?;
    let task = ToyTask::new(focal);
    let records: Vec<CorpusRecord> = (0..n as u64)
        .map(|i| {
            let tokens = sample_completion(&policy, &params, cfg.seed.wrapping_add(i));
            CorpusRecord {
                repo: "toy".into(),
                focal_class: "BenchmarkCommand".into(),
                focal_method: focal.into(),
                prompt: task.hint.clone(),
                test: task.render(&policy.vocabulary, &tokens),
                source: RecordSource::Generated,
            }
        })
        .collect();
    write_all(out, CORPUS_RECORD, &records)?;
    Ok(0)
}

pub fn train_rm_cmd(
    input: &Path,
    out: Option<&Path>,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Failures> {
    let labeled: Vec<LabeledRecord> = read_all(input, &[LABELED_RECORD])?;
    let (model, report) =
        train_reward_model(&labeled, epochs, lr, seed).map_err(|e| DataError(e.to_string()))?;
    let mut w = open_output(out)?;
    writeln!(w, "{}", serde_json::to_string(&model)?)?;
    w.flush()?;
    eprintln!(
        "best epoch {}, validation mse {:.4}{}",
        report.best_epoch,
        report.best_val_loss,
        if report.stopped_early {
            ", stopped early"
        } else {
            ""
        }
    );
    Ok(0)
}
