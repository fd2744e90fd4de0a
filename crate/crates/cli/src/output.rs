//! Output files. Every table gets a `<stem>.json` sidecar carrying the config
//! hash; records carry it inline. Only `timing.json` varies between runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    hash: String,
}

impl OutputDir {
    pub fn create(root: PathBuf, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, hash })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("records serialize");
            buf.push(b'\n');
        }
        self.write_bytes(name, &buf)
    }

    /// Pretty JSON with `config_hash` added to a top-level object.
    pub fn write_json(&self, name: &str, mut value: Value) -> Result<PathBuf, CliError> {
        if let Value::Object(map) = &mut value {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let mut buf = serde_json::to_vec_pretty(&value).expect("json serializes");
        buf.push(b'\n');
        self.write_bytes(name, &buf)
    }

    /// CSV plus `<stem>.json` holding the hash, the column list and `meta`.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>], meta: Value) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::io(self.path(name), e.into()))?;
        for row in rows {
            w.write_record(row).map_err(|e| CliError::io(self.path(name), e.into()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(self.path(name), e.into_error()))?;
        let path = self.write_bytes(name, &bytes)?;
        let stem = name.strip_suffix(".csv").unwrap_or(name);
        self.write_json(&format!("{stem}.json"), json!({ "file": name, "columns": header, "meta": meta }))?;
        Ok(path)
    }
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn print_line(line: &str) {
    let mut out = std::io::stdout().lock();
    // a closed stdout is not worth failing a run over
    let _ = writeln!(out, "{line}");
}
