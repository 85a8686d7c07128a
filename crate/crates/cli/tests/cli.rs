use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use psdim_cli::config::{complex_overrides, Config};
use psdim_cli::output::{Artifact, RunManifest};
use serde_json::Value;

fn psdim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psdim")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn json_lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with('{')).map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn criterion_prints_finite() {
    let dir = tempfile::tempdir().unwrap();
    let o = psdim(&["criterion", "--rho", "1", "--h", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().next(), Some("Finite"));
    let recs = json_lines(&o);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["value"], "Finite");
}

#[test]
fn pressure_record_has_error_bar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = psdim(&["pressure", "--family", "tan", "--lambda", "0+3.14159265i", "--t", "2.0", "--depth", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = &json_lines(&o)[0];
    let (p, err) = (r["value"].as_f64().unwrap(), r["error"].as_f64().unwrap());
    let b = r["bracket"].as_array().unwrap();
    assert!(b[0].as_f64().unwrap() <= p && p <= b[1].as_f64().unwrap());
    // h = 2 for this map, so P(2) is zero up to the bar
    assert!(p.abs() <= err, "P(2) = {p} ± {err}");
    assert_eq!(r["truncation"]["depth"], 8);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(r["manifest"], manifest["hash"]);
    assert_eq!(manifest["regime"]["regime"], "SubExpanding");
    assert_eq!(manifest["config"]["lambda_im"], "3.14159265");
    let csv = fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with(",manifest"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(manifest["hash"].as_str().unwrap())));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = psdim(&["pressure", "--t", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json_lines(&o)[0]["error"], "Config");

    let o = psdim(&["criterion", "--rho", "one", "--h", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_errors_exit_3_with_the_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let o = psdim(&["pressure", "--lambda", "0.5", "--t", "0.3"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json_lines(&o)[0]["error"], "BelowBorelThreshold");

    let o = psdim(&["criterion", "--rho=-1", "--h", "2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_loses_to_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# finiteness\nrho = 1\nh = 1.2\n").unwrap();
    let o = psdim(&["criterion", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(json_lines(&o)[0]["value"], "Infinite");
    let o = psdim(&["criterion", "--config", cfg.to_str().unwrap(), "--h", "2"], dir.path());
    assert_eq!(json_lines(&o)[0]["value"], "Finite");
}

#[test]
fn selftest_passes_and_is_thread_independent() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o1 = Command::new(env!("CARGO_BIN_EXE_psdim"))
        .args(["selftest", "--seed", "11", "--threads", "1", "--out"])
        .arg(a.path())
        .output()
        .unwrap();
    let o2 = Command::new(env!("CARGO_BIN_EXE_psdim"))
        .args(["selftest", "--seed", "11", "--threads", "4", "--out"])
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(o1.status.code(), Some(0), "{}", String::from_utf8_lossy(&o1.stdout));
    assert_eq!(o2.status.code(), Some(0));
    let r1 = fs::read(a.path().join("records.jsonl")).unwrap();
    assert_eq!(r1, fs::read(b.path().join("records.jsonl")).unwrap());
    assert_eq!(o1.stdout, o2.stdout);
}

#[test]
fn sweep_reports_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = psdim(
        &["sweep", "--lambda", "0.5", "--set", "sweep_command=pressure", "--set", "sweep_key=t", "--set", "sweep_values=2,1,0.4,1.5", "--depth", "6"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let recs = json_lines(&o);
    let order: Vec<u64> = recs.iter().map(|r| r["sweep_index"].as_u64().unwrap()).collect();
    assert_eq!(order, vec![0, 1, 2, 3]);
    assert_eq!(recs[2]["error"], "BelowBorelThreshold");
    // P is decreasing in t
    let (p2, p1, p15) = (recs[0]["value"].as_f64().unwrap(), recs[1]["value"].as_f64().unwrap(), recs[3]["value"].as_f64().unwrap());
    assert!(p2 < p15 && p15 < p1);
    assert!(dir.path().join("sweep0_pressure.csv").exists() && !dir.path().join("sweep2_pressure.csv").exists());
}

#[test]
fn config_parsing() {
    let c = Config::parse("a = 1.5  # trailing\n\n# full line\nfamily=mobius_exp\n").unwrap();
    assert_eq!(c.f64_or("a", 0.0).unwrap(), 1.5);
    assert_eq!(c.str_or("family", ""), "mobius_exp");
    assert!(Config::parse("no equals sign").is_err());
    assert!(Config::parse("bad key = 1").is_err());

    // full round-trip precision
    let x = 0.1f64 + 0.2;
    let mut c = Config::default();
    c.apply_overrides(&[format!("x={x:?}")]).unwrap();
    assert_eq!(c.f64_or("x", 0.0).unwrap(), x);

    let o = complex_overrides("lambda", "0+3.141592653589793i").unwrap();
    c.apply_overrides(&o).unwrap();
    assert_eq!(c.complex("lambda").unwrap().unwrap().im, std::f64::consts::PI);
    assert!(c.map_spec().is_ok());
    c.set("family", "cosh").unwrap();
    assert!(c.map_spec().is_err());
}

#[test]
fn manifest_hash_ignores_wall_time_only() {
    let mut c = Config::default();
    c.set("t", "1").unwrap();
    let a = RunManifest::new("pressure", &c, 1, None);
    let mut b = RunManifest::new("pressure", &c, 1, None);
    b.wall_time = 3.0;
    assert_eq!(a.hash, RunManifest::new("pressure", &c, 1, None).hash);
    assert_eq!(a.hash, b.hash);
    assert_ne!(a.hash, RunManifest::new("pressure", &c, 2, None).hash);
    c.set("t", "1.0").unwrap();
    assert_ne!(a.hash, RunManifest::new("pressure", &c, 1, None).hash);
}

#[test]
fn text_artifacts_carry_the_hash_after_the_first_line() {
    let a = Artifact::Text { name: "m.txt".into(), body: "header\nrow\n".into() };
    assert_eq!(a.render("abc"), "header\n# manifest=abc\nrow\n");
    let c = Artifact::csv("c.csv", &["x"], vec![vec!["1".into()]]);
    assert_eq!(c.renamed("p_").render("h"), "x,manifest\n1,h\n");
}
