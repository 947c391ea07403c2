//! JSON-lines report records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One checked quantity. Non-finite values serialize as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub bound_name: String,
    pub parameters: BTreeMap<String, Value>,
    pub analytic_value: Option<f64>,
    pub empirical_value: Option<f64>,
    pub standard_error: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ReportRecord {
    pub fn new(experiment: &str, bound_name: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            bound_name: bound_name.to_string(),
            parameters: BTreeMap::new(),
            analytic_value: None,
            empirical_value: None,
            standard_error: None,
            pass: true,
            wall_clock_seconds: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn analytic(mut self, v: f64) -> Self {
        self.analytic_value = finite(v);
        self
    }

    pub fn empirical(mut self, v: f64, se: f64) -> Self {
        self.empirical_value = finite(v);
        self.standard_error = finite(se);
        self
    }

    pub fn pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }

    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn to_jsonl(records: &[ReportRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line()?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ReportRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Appends records to `path`, creating it if needed.
pub fn append_jsonl(path: &Path, records: &[ReportRecord]) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(to_jsonl(records)?.as_bytes())
        .map_err(|e| Error::io(path, e))
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x != 0.0 && (x.abs() >= 1e5 || x.abs() < 1e-3) => format!("{x:.4e}"),
        Some(x) => format!("{x:.5}"),
        None => "-".into(),
    }
}

/// A fixed-width table of the records, one per line.
pub fn pretty(records: &[ReportRecord]) -> String {
    let name_w = records
        .iter()
        .map(|r| r.experiment.len() + r.bound_name.len() + 1)
        .max()
        .unwrap_or(10)
        .max(10);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_w$}  {:>12}  {:>12}  {:>11}  {:<4}  parameters",
        "check", "analytic", "empirical", "std.err", "ok"
    );
    for r in records {
        let name = format!("{}/{}", r.experiment, r.bound_name);
        let params = serde_json::to_string(&r.parameters).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>12}  {:>12}  {:>11}  {:<4}  {}",
            name,
            cell(r.analytic_value),
            cell(r.empirical_value),
            cell(r.standard_error),
            if r.pass { "pass" } else { "FAIL" },
            params
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_nulls() {
        let r = ReportRecord::new("verify", "mgf")
            .param("beta", 2.0)
            .analytic(f64::INFINITY)
            .empirical(0.5, 0.01)
            .pass(false);
        let line = r.to_line().unwrap();
        assert!(line.contains("\"analytic_value\":null"));
        assert!(!line.contains("wall_clock"));
        let back = parse_jsonl(&to_jsonl(&[r.clone(), r.clone()]).unwrap()).unwrap();
        assert_eq!(back, vec![r.clone(), r]);
    }

    #[test]
    fn append_accumulates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let r = ReportRecord::new("e", "b");
        append_jsonl(&path, std::slice::from_ref(&r)).unwrap();
        append_jsonl(&path, std::slice::from_ref(&r)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(parse_jsonl(&text).unwrap().len(), 2);
        assert!(pretty(&[r]).contains("e/b"));
    }
}
