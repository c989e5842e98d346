//! Line-oriented JSON input and output with a `schema` tag on every record.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub const CORPUS_RECORD: &str = "corpus_record.v1";
pub const COMPLETION: &str = "completion.v1";
pub const QUALITY_REPORT: &str = "quality_report.v1";
pub const LABELED_RECORD: &str = "labeled_record.v1";
pub const PROMPT_REQUEST: &str = "prompt_request.v1";
pub const PROMPT_RECORD: &str = "prompt_record.v1";
pub const CORPUS_STATS: &str = "corpus_stats.v1";
pub const EPOCH_METRICS: &str = "epoch_metrics.v1";
pub const ERROR: &str = "error.v1";

/// Lines handed to the worker pool at once.
pub const BATCH: usize = 1024;

pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Box::new(BufReader::new(file)))
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

/// Serializes `body` with a leading `schema` field.
pub fn tagged<T: Serialize>(schema: &str, body: &T) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("schema".into(), Value::String(schema.into()));
    match serde_json::to_value(body)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    Ok(serde_json::to_string(&Value::Object(map))?)
}

/// One-line record for input that could not be processed.
pub fn error_line(line: usize, message: &str) -> String {
    serde_json::json!({ "schema": ERROR, "line": line, "message": message }).to_string()
}

pub fn schema_of(value: &Value) -> Option<&str> {
    value.get("schema").and_then(Value::as_str)
}

/// Parses one line as `T`, rejecting records tagged with a schema not in
/// `accept`. Untagged lines are accepted.
pub fn parse_value(line: &str, accept: &[&str]) -> Result<Value, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    if !value.is_object() {
        return Err("expected a JSON object".into());
    }
    if let Some(schema) = schema_of(&value) {
        if !accept.contains(&schema) {
            return Err(format!("unexpected schema `{schema}`"));
        }
    }
    Ok(value)
}

pub fn parse_line<T: DeserializeOwned>(line: &str, accept: &[&str]) -> Result<T, String> {
    let value = parse_value(line, accept)?;
    serde_json::from_value(value).map_err(|e| format!("invalid record: {e}"))
}

/// Calls `f` with batches of `(line_number, text)`; blank lines are
/// skipped and numbering starts at 1.
pub fn for_each_batch(
    reader: Box<dyn BufRead>,
    mut f: impl FnMut(Vec<(usize, String)>) -> Result<()>,
) -> Result<()> {
    let mut batch = Vec::with_capacity(BATCH);
    for (i, line) in reader.lines().enumerate() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        batch.push((i + 1, line));
        if batch.len() == BATCH {
            f(std::mem::take(&mut batch))?;
        }
    }
    if !batch.is_empty() {
        f(batch)?;
    }
    Ok(())
}

/// Reads every non-blank line as `T`; the first bad line is an error.
pub fn read_all<T: DeserializeOwned>(path: &Path, accept: &[&str]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut failure = None;
    for_each_batch(open_input(path)?, |batch| {
        for (n, line) in batch {
            match parse_line(&line, accept) {
                Ok(v) => out.push(v),
                Err(e) if failure.is_none() => failure = Some(format!("line {n}: {e}")),
                Err(_) => {}
            }
        }
        Ok(())
    })?;
    match failure {
        Some(msg) => Err(crate::DataError(msg).into()),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_tag_comes_first() {
        let line = tagged("x.v1", &serde_json::json!({"a": 1})).unwrap();
        assert_eq!(line, r#"{"schema":"x.v1","a":1}"#);
    }

    #[test]
    fn foreign_schema_is_rejected() {
        assert!(parse_value(r#"{"schema":"y.v1"}"#, &["x.v1"]).is_err());
        assert!(parse_value(r#"{"a":1}"#, &["x.v1"]).is_ok());
        assert!(parse_value("[1]", &["x.v1"]).is_err());
        assert!(parse_value("{", &["x.v1"]).is_err());
    }
}
