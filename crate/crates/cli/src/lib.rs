//! Batch harness: turns a config into records, artifacts and a manifest.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use std::time::Instant;

use psdim_core::rng::task_rng;
use psdim_core::Error;
use rand::RngCore;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::commands::{needs_map, run, Ctx, Outcome};
use crate::config::Config;
use crate::output::{Artifact, RegimeSummary, RunManifest};

#[derive(Debug)]
pub enum RunError {
    Numeric(Error),
    /// Some self-test check did not pass; the records are still written.
    Selftest(Box<Run>),
}

impl RunError {
    pub fn name(&self) -> &'static str {
        match self {
            RunError::Numeric(e) => e.name(),
            RunError::Selftest(_) => "SelftestFailed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numeric(e) => e.exit_code(),
            RunError::Selftest(_) => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Numeric(e) => e.to_string(),
            RunError::Selftest(run) => {
                let failed = run.records.iter().filter(|r| r["value"] == json!(false)).count();
                format!("{failed} self-test checks failed")
            }
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numeric(e)
    }
}

#[derive(Debug)]
pub struct Run {
    pub manifest: RunManifest,
    pub records: Vec<Value>,
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
}

/// The error record printed in place of results.
pub fn error_record(name: &str, message: &str, hash: &str) -> Value {
    json!({ "error": name, "message": message, "manifest": hash })
}

pub fn execute(command: &str, cfg: &Config) -> Result<Run, RunError> {
    let start = Instant::now();
    let seed = cfg.u64_or("seed", 0)?;
    let (outcome, regime) = if command == "sweep" {
        (sweep(cfg, seed)?, None)
    } else {
        let ctx = Ctx::new(cfg, seed, needs_map(command))?;
        let regime = ctx.map.as_ref().map(|(_, r)| RegimeSummary::from(r));
        (run(command, &ctx)?, regime)
    };
    let mut manifest = RunManifest::new(command, cfg, seed, regime);
    manifest.wall_time = start.elapsed().as_secs_f64();
    let mut records = outcome.records;
    for r in &mut records {
        r["manifest"] = json!(manifest.hash);
    }
    let run = Run { manifest, records, artifacts: outcome.artifacts, summary: outcome.summary };
    if command == "selftest" && run.records.iter().any(|r| r["value"] == json!(false)) {
        return Err(RunError::Selftest(Box::new(run)));
    }
    Ok(run)
}

/// Runs `sweep_command` once per entry of `sweep_values`, with `sweep_key`
/// set to that value. Points run in parallel but are reported in grid
/// order, each with a seed drawn from its own stream.
fn sweep(cfg: &Config, seed: u64) -> psdim_core::Result<Outcome> {
    let command = cfg.str_or("sweep_command", "");
    if command.is_empty() || command == "sweep" {
        return Err(Error::Config("sweep_command must name another command".into()));
    }
    let key = cfg.str_or("sweep_key", "");
    let values: Vec<String> = match cfg.str_or("sweep_values", "") {
        "" => return Err(Error::Config("missing sweep_values".into())),
        v => v.split(',').map(|x| x.trim().to_string()).collect(),
    };
    let points: Vec<(Config, u64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = cfg.clone();
            c.set(key, v)?;
            Ok((c, task_rng(seed, i as u64).next_u64()))
        })
        .collect::<psdim_core::Result<_>>()?;
    let results: Vec<psdim_core::Result<Outcome>> = points
        .par_iter()
        .map(|(c, s)| run(command, &Ctx::new(c, *s, needs_map(command))?))
        .collect();

    let mut out = Outcome::default();
    for (i, (r, v)) in results.into_iter().zip(&values).enumerate() {
        let tag = |mut rec: Value| {
            rec["sweep_index"] = json!(i);
            rec["sweep_value"] = json!(v);
            rec
        };
        match r {
            Ok(o) => {
                out.records.extend(o.records.into_iter().map(tag));
                out.artifacts.extend(o.artifacts.into_iter().map(|a| a.renamed(&format!("sweep{i}_"))));
                out.summary.extend(o.summary.into_iter().map(|s| format!("{key}={v}: {s}")));
            }
            // a config mistake fails the whole sweep, a numeric one only its point
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => out.records.push(tag(json!({ "error": e.name(), "message": e.to_string() }))),
        }
    }
    Ok(out)
}
