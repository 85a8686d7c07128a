//! Run manifests, JSON-lines records and file artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use psdim_core::{Error, RegimeReport, Result, SpherePoint};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: String,
    pub safety_radius: f64,
    pub postsingular: Vec<SpherePoint>,
}

impl From<&RegimeReport> for RegimeSummary {
    fn from(r: &RegimeReport) -> Self {
        RegimeSummary { regime: format!("{:?}", r.regime), safety_radius: r.safety_radius, postsingular: r.postsingular() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub regime: Option<RegimeSummary>,
    /// Not part of the hash, so reruns hash identically.
    pub wall_time: f64,
    pub hash: String,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &Config, seed: u64, regime: Option<RegimeSummary>) -> Self {
        let mut m = RunManifest {
            command: command.to_string(),
            config: cfg.entries().clone(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            regime,
            wall_time: 0.0,
            hash: String::new(),
        };
        let hashed = json!({
            "command": m.command,
            "config": m.config,
            "seed": m.seed,
            "version": m.version,
            "regime": m.regime,
        });
        m.hash = hex::encode(Sha256::digest(hashed.to_string().as_bytes()));
        m
    }
}

/// One estimate. `value` and the uncertainty (`error` or `bracket`) are
/// always present, `truncation` records the cut-offs that produced it and
/// `detail` the full result.
pub fn record(kind: &str, value: Value, uncertainty: Uncertainty, truncation: Value, detail: Value) -> Value {
    let mut r = json!({ "kind": kind, "value": value, "truncation": truncation, "detail": detail });
    match uncertainty {
        Uncertainty::Error(e) => r["error"] = json!(e),
        Uncertainty::Bracket(lo, hi) => r["bracket"] = json!([lo, hi]),
        Uncertainty::Both(e, lo, hi) => {
            r["error"] = json!(e);
            r["bracket"] = json!([lo, hi]);
        }
        Uncertainty::Exact => r["error"] = json!(0.0),
    }
    r
}

pub enum Uncertainty {
    Error(f64),
    Bracket(f64, f64),
    Both(f64, f64, f64),
    /// Classifications and other exact answers.
    Exact,
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    /// Header row and data rows; a `manifest` column is appended on write.
    Csv { name: String, header: Vec<String>, rows: Vec<Vec<String>> },
    /// Text whose first line is kept first; a `# manifest=` line follows it.
    Text { name: String, body: String },
}

impl Artifact {
    pub fn csv(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Artifact::Csv { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows }
    }

    pub fn name(&self) -> &str {
        match self {
            Artifact::Csv { name, .. } | Artifact::Text { name, .. } => name,
        }
    }

    pub fn renamed(self, prefix: &str) -> Self {
        match self {
            Artifact::Csv { name, header, rows } => Artifact::Csv { name: format!("{prefix}{name}"), header, rows },
            Artifact::Text { name, body } => Artifact::Text { name: format!("{prefix}{name}"), body },
        }
    }

    pub fn render(&self, hash: &str) -> String {
        match self {
            Artifact::Csv { header, rows, .. } => {
                let mut out = header.join(",");
                out.push_str(",manifest\n");
                for r in rows {
                    out.push_str(&r.join(","));
                    out.push(',');
                    out.push_str(hash);
                    out.push('\n');
                }
                out
            }
            Artifact::Text { body, .. } => {
                let (first, rest) = body.split_once('\n').unwrap_or((body, ""));
                format!("{first}\n# manifest={hash}\n{rest}")
            }
        }
    }
}

/// Shortest round-trip text of a float, as used in CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn jsonl(records: &[Value]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn write_outputs(dir: &Path, manifest: &RunManifest, records: &[Value], artifacts: &[Artifact]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    fs::create_dir_all(dir).map_err(io)?;
    let m = serde_json::to_string_pretty(manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), m + "\n").map_err(io)?;
    fs::write(dir.join("records.jsonl"), jsonl(records)).map_err(io)?;
    for a in artifacts {
        fs::write(dir.join(a.name()), a.render(&manifest.hash)).map_err(io)?;
    }
    Ok(())
}
