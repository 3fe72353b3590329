//! Result records and their on-disk form: `manifest.json` plus one CSV per trace.

use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Trace { name: name.into(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Builds a trace from equally long columns.
    pub fn from_columns(name: impl Into<String>, columns: &[(&str, &[f64])]) -> Self {
        let len = columns.first().map(|c| c.1.len()).unwrap_or(0);
        assert!(columns.iter().all(|c| c.1.len() == len), "columns differ in length");
        let mut t = Trace::new(name, &columns.iter().map(|c| c.0).collect::<Vec<_>>());
        t.rows = (0..len).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        t
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), pass, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub traces: Vec<Trace>,
    pub verdicts: Vec<Verdict>,
    /// Experiment-specific outputs: fits, predicted and fitted exponents.
    pub summary: serde_json::Value,
    pub warnings: Vec<String>,
    pub wall_time: f64,
    pub tool_version: String,
}

impl ResultRecord {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn hash8(&self) -> &str {
        &self.config_hash[..8]
    }

    pub fn trace_file(&self, trace: &Trace) -> String {
        format!("{}_{}.csv", self.hash8(), trace.name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct TraceEntry<'a> {
    file: String,
    columns: &'a [String],
    rows: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config: &'a serde_json::Value,
    config_hash: &'a str,
    /// Hash of the traces, verdicts and summary; independent of wall time.
    content_hash: String,
    traces: Vec<TraceEntry<'a>>,
    verdicts: &'a [Verdict],
    summary: &'a serde_json::Value,
    warnings: &'a [String],
    wall_time: f64,
    tool_version: &'a str,
}

/// Writes the traces and the manifest into `dir`. An existing manifest is
/// first renamed to `manifest.<UTC timestamp>.json`.
pub fn persist(record: &ResultRecord, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST);
    if path.exists() {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.6fZ");
        std::fs::rename(&path, dir.join(format!("manifest.{stamp}.json")))?;
    }
    let mut entries = Vec::with_capacity(record.traces.len());
    let mut content = Sha256::new();
    for trace in &record.traces {
        let bytes = trace.to_csv()?;
        let file = record.trace_file(trace);
        std::fs::write(dir.join(&file), &bytes)?;
        let digest = sha256_hex(&bytes);
        content.update(digest.as_bytes());
        entries.push(TraceEntry { file, columns: &trace.columns, rows: trace.rows.len(), sha256: digest });
    }
    content.update(serde_json::to_vec(&record.verdicts)?);
    content.update(serde_json::to_vec(&record.summary)?);
    let manifest = Manifest {
        experiment: &record.experiment,
        config: &record.config,
        config_hash: &record.config_hash,
        content_hash: hex::encode(content.finalize()),
        traces: entries,
        verdicts: &record.verdicts,
        summary: &record.summary,
        warnings: &record.warnings,
        wall_time: record.wall_time,
        tool_version: &record.tool_version,
    };
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ResultRecord {
        let traces = (0..3)
            .map(|i| Trace::from_columns(format!("trace{i}"), &[("t", &[0.0, 1.0][..]), ("value", &[1.0, 0.5 * i as f64][..])]))
            .collect();
        ResultRecord {
            experiment: "simulate".into(),
            config: serde_json::json!({"schema": 1}),
            config_hash: sha256_hex(b"{\"schema\":1}"),
            traces,
            verdicts: vec![Verdict::new("check", true, "ok")],
            summary: serde_json::json!({}),
            warnings: vec![],
            wall_time: 0.0,
            tool_version: "test".into(),
        }
    }

    #[test]
    fn three_traces_give_three_csvs_and_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record();
        persist(&rec, dir.path()).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names.len(), 4);
        assert!(names.contains(&MANIFEST.to_string()));
        assert!(names.iter().filter(|n| n.starts_with(rec.hash8()) && n.ends_with(".csv")).count() == 3);
    }

    #[test]
    fn rerun_archives_previous_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record();
        persist(&rec, dir.path()).unwrap();
        let first: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        persist(&rec, dir.path()).unwrap();
        let second: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        let archived = std::fs::read_dir(dir.path()).unwrap().filter(|e| {
            let n = e.as_ref().unwrap().file_name().into_string().unwrap();
            n.starts_with("manifest.") && n != MANIFEST
        });
        assert_eq!(archived.count(), 1);
        assert_eq!(first["config_hash"], second["config_hash"]);
        assert_eq!(first["content_hash"], second["content_hash"]);
    }
}
