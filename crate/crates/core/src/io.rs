//! Output files: CSV tables and JSON documents, each carrying a manifest.
//!
//! Formatting is deterministic so that re-running a command with the same
//! configuration reproduces the file byte for byte. CSV manifests are `#`
//! comment lines ahead of the header; JSON documents are
//! `{"manifest": .., "data": ..}` with sorted keys.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::{LabError, LabResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub backend: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cutoffs: Vec<usize>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, backend: &str) -> Self {
        Self {
            command: command.to_string(),
            version: ARTIFACT_VERSION.to_string(),
            backend: backend.to_string(),
            ..Self::default()
        }
    }

    pub fn with_state<S: Serialize>(mut self, state: &S) -> Self {
        self.state = serde_json::to_value(state).ok();
        self
    }

    pub fn with_tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn with_parameter<V: Serialize>(mut self, name: &str, value: V) -> Self {
        if let Ok(v) = serde_json::to_value(value) {
            self.parameters.insert(name.to_string(), v);
        }
        self
    }

    fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

/// Shortest round-trip decimal form, with `-0` folded to `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub fn ensure_finite(values: &[f64]) -> LabResult<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(LabError::Tolerance(format!("non-finite value {} at position {i}", values[i]))),
        None => Ok(()),
    }
}

/// Rectangular numeric table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn check_finite(&self) -> LabResult<()> {
        self.rows.iter().try_for_each(|r| ensure_finite(r))
    }

    pub fn to_csv(&self, manifest: &Manifest) -> LabResult<String> {
        self.check_finite()?;
        let mut out = manifest_comment(manifest);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&x| fmt_num(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("table serializes")
    }
}

fn manifest_comment(manifest: &Manifest) -> String {
    format!("# manifest: {}\n", serde_json::to_string(&manifest.to_value()).expect("manifest serializes"))
}

/// `{"manifest": .., "data": ..}`, pretty printed with sorted keys and a trailing newline.
pub fn json_document(manifest: &Manifest, data: Value) -> LabResult<String> {
    check_value_finite(&data)?;
    let mut doc = serde_json::Map::new();
    doc.insert("data".into(), data);
    doc.insert("manifest".into(), manifest.to_value());
    let mut s = serde_json::to_string_pretty(&Value::Object(doc))?;
    s.push('\n');
    Ok(s)
}

fn check_value_finite(v: &Value) -> LabResult<()> {
    match v {
        // serde_json turns non-finite floats into null; none of our documents use null otherwise
        Value::Null => Err(LabError::Tolerance("non-finite value in output document".into())),
        Value::Array(a) => a.iter().try_for_each(check_value_finite),
        Value::Object(o) => o.values().try_for_each(check_value_finite),
        _ => Ok(()),
    }
}

/// Write to `path`, or to stdout when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, content: &str) -> LabResult<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, content)?;
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

/// Strip `#` comment lines from CSV text and parse the remaining numeric rows.
pub fn parse_csv(text: &str) -> LabResult<Table> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| LabError::Config("empty CSV".into()))?;
    let mut t = Table::new(&header.split(',').collect::<Vec<_>>());
    for l in lines.filter(|l| !l.trim().is_empty()) {
        let row = l
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| LabError::Config(format!("bad cell {c:?}: {e}"))))
            .collect::<LabResult<Vec<f64>>>()?;
        if row.len() != t.columns.len() {
            return Err(LabError::Config("ragged CSV row".into()));
        }
        t.rows.push(row);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_and_manifest() {
        let m = Manifest::new("pnd", "analytic").with_tolerance("tail", 1e-10).with_parameter("max_n", 3);
        let mut t = Table::new(&["n", "p"]);
        t.push(vec![0.0, 0.25]);
        t.push(vec![1.0, -0.0]);
        let s = t.to_csv(&m).unwrap();
        assert!(s.starts_with("# manifest: {"));
        assert!(s.contains("\"version\":"));
        assert!(s.ends_with("1,0\n"));
        assert_eq!(parse_csv(&s).unwrap(), Table { rows: vec![vec![0.0, 0.25], vec![1.0, 0.0]], ..t });
    }

    #[test]
    fn non_finite_rejected() {
        let mut t = Table::new(&["x"]);
        t.push(vec![f64::NAN]);
        assert!(t.to_csv(&Manifest::new("x", "fock")).is_err());
        assert!(json_document(&Manifest::new("x", "fock"), serde_json::json!([1.0, f64::INFINITY])).is_err());
    }

    #[test]
    fn json_keys_sorted() {
        let d = json_document(&Manifest::new("m", "fock"), serde_json::json!({"b": 1, "a": 2})).unwrap();
        let a = d.find("\"a\"").unwrap();
        let b = d.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(d.find("\"data\"").unwrap() < d.find("\"manifest\"").unwrap());
    }
}
