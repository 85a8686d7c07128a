use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use psdim_cli::commands::COMMANDS;
use psdim_cli::config::{complex_overrides, Config};
use psdim_cli::output::{jsonl, write_outputs};
use psdim_cli::{error_record, execute, Run, RunError};
use psdim_core::Error;

/// Thermodynamic-formalism estimates for tangent-type meromorphic maps.
///
/// Every option below is shorthand for a config key (`--n-cap` sets
/// `n_cap`); any other key can be given with `--set key=value`. Options on
/// the command line win over the config file.
#[derive(Parser, Debug)]
#[command(name = "psdim", version)]
struct Cli {
    #[arg(value_parser = COMMANDS)]
    command: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for manifest.json, records.jsonl and artifacts.
    #[arg(long, default_value = "psdim_out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    family: Option<String>,
    /// Complex parameter such as `0+3.14159265i`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    deg_p: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    s: Option<String>,
    /// Comma-separated exponents.
    #[arg(long)]
    t_grid: Option<String>,
    /// `2d` or `triple`.
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    n_cap: Option<String>,
    #[arg(long)]
    n_max: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    #[arg(long)]
    bins: Option<String>,
}

impl Cli {
    fn config(&self) -> Result<Config, Error> {
        let mut cfg = match &self.config {
            Some(p) => Config::parse(&std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
            None => Config::default(),
        };
        cfg.apply_overrides(&self.set)?;
        let plain = [
            ("family", &self.family),
            ("t", &self.t),
            ("depth", &self.depth),
            ("rho", &self.rho),
            ("h", &self.h),
            ("deg_p", &self.deg_p),
            ("method", &self.method),
            ("s", &self.s),
            ("t_grid", &self.t_grid),
            ("lattice", &self.lattice),
            ("n_cap", &self.n_cap),
            ("n_max", &self.n_max),
            ("k_max", &self.k_max),
            ("bins", &self.bins),
        ];
        for (key, v) in plain {
            if let Some(v) = v {
                cfg.set(key, v)?;
            }
        }
        if let Some(l) = &self.lambda {
            cfg.apply_overrides(&complex_overrides("lambda", l)?)?;
        }
        if let Some(seed) = self.seed {
            cfg.set("seed", &seed.to_string())?;
        }
        Ok(cfg)
    }
}

fn emit(run: &Run, out: &Path) -> Result<(), Error> {
    for line in &run.summary {
        println!("{line}");
    }
    print!("{}", jsonl(&run.records));
    write_outputs(out, &run.manifest, &run.records, &run.artifacts)
}

fn fail(name: &str, message: &str, hash: &str, code: i32) -> ExitCode {
    eprintln!("psdim: {message}");
    println!("{}", error_record(name, message, hash));
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("Config", &e.to_string(), "", 2);
        }
    }
    let cfg = match cli.config() {
        Ok(c) => c,
        Err(e) => return fail(e.name(), &e.to_string(), "", e.exit_code()),
    };
    match execute(&cli.command, &cfg) {
        Ok(run) => match emit(&run, &cli.out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e.name(), &e.to_string(), &run.manifest.hash, e.exit_code()),
        },
        Err(err) => {
            let hash = match &err {
                RunError::Selftest(run) => {
                    if let Err(e) = emit(run, &cli.out) {
                        eprintln!("psdim: {e}");
                    }
                    run.manifest.hash.clone()
                }
                RunError::Numeric(_) => String::new(),
            };
            fail(err.name(), &err.message(), &hash, err.exit_code())
        }
    }
}
