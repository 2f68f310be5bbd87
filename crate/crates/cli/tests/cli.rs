use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tvdbar_cli::manifest::{sha256_file, RunManifest};

const SMALL: &str = r#"{"ell": 5, "m": 4, "r": 3, "r_tilde": 5, "order": 8, "mesh_rings": 16,
    "iterations": 2, "budget": 12, "rho": 1.5}"#;

fn tvdbar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvdbar"))
        .args(args)
        .env_remove("TVDBAR_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_run(dir: &Path, name: &str, threads: &str) -> PathBuf {
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.join(name);
    let res = tvdbar(&["run", "--config", p(&cfg), "--out", p(&out), "--threads", threads]);
    assert!(res.status.success(), "{}", stderr(&res));
    out
}

#[test]
fn version_reports_build() {
    let out = tvdbar(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(env!("CARGO_PKG_VERSION")) && text.contains("target"), "{text}");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"radius": 5}"#).unwrap();
    let out = tvdbar(&["run", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("radius"));
}

#[test]
fn missing_config_exits_2() {
    let out = tvdbar(&["run", "--config", "/nonexistent/cfg.json", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_then_metrics_reproduces_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), "out", "2");
    let table = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let res = tvdbar(&["metrics", "--truth", p(&out.join("truth.bin")), "--results", p(&out)]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(String::from_utf8(res.stdout).unwrap(), table);
}

#[test]
fn manifest_hashes_match_and_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_run(dir.path(), "a", "1");
    let b = small_run(dir.path(), "b", "3");
    let ma: RunManifest = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let mb: RunManifest = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert!(ma.outputs.iter().any(|f| f.path == "metrics.csv"));
    assert!(ma.outputs.iter().any(|f| f.path == "j2/sigma_ce.bin"));
    for f in &ma.outputs {
        assert_eq!(sha256_file(&a.join(&f.path)).unwrap(), f.sha256, "{}", f.path);
    }
    assert_eq!(ma.outputs, mb.outputs);
    assert_eq!(ma.config, mb.config);
    assert_eq!(ma.seeds["noise"], 0);
    assert_eq!(ma.threads, 1);
    assert!(ma.stages.iter().any(|s| s.stage == "D-bar j=2"));
}

#[test]
fn stage_by_stage_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let sim = tvdbar(&[
        "simulate", "--phantom", "heart_and_lungs", "--noise", "0.001", "--seed", "7", "--order", "8",
        "--mesh-rings", "16", "--ell", "5", "--out", p(&data),
    ]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    for f in ["truth.bin", "truth.json", "truth.png", "mu.bin", "nd.csv", "dn.bin", "dn.json", "manifest.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let header: serde_json::Value = serde_json::from_str(&fs::read_to_string(data.join("dn.json")).unwrap()).unwrap();
    assert_eq!(header["seed"], 7);
    assert_eq!(header["noise"], 0.001);

    let tau = d.join("tau.bin");
    let steps: Vec<Vec<String>> = vec![
        vec!["scatter", "--dn", p(&data.join("dn.bin")), "--m", "4", "--r", "3", "--r-tilde", "5", "--out", p(&tau)],
        vec!["reconstruct", "--scattering", p(&tau), "--cutoff", "3", "--ell", "5", "--out", p(&d.join("db.bin")),
             "--preview", p(&d.join("db.png"))],
        vec!["segment", "--in", p(&d.join("db.bin")), "--K", "4", "--lambda", "0.1", "--out", p(&d.join("tv.bin")),
             "--labels", p(&d.join("labels.bin"))],
        vec!["enhance", "--in", p(&d.join("tv.bin")), "--data", p(&data.join("dn.bin")), "--bounds", "0.3:2.5",
             "--budget", "12", "--rho", "1.5", "--mesh-rings", "16", "--out", p(&d.join("ce.bin")),
             "--samples", p(&d.join("samples.csv")), "--manifest", p(&d.join("ce.manifest.json"))],
        vec!["scatter", "--mu", p(&data.join("mu.bin")), "--kmask", "annulus:3:4", "--m", "4", "--r", "3",
             "--r-tilde", "5", "--convention", "t", "--out", p(&d.join("ext.bin"))],
        vec!["preview", "--in", p(&d.join("ce.bin")), "--scale", "0.3:2.5", "--out", p(&d.join("ce.png"))],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let res = tvdbar(&args);
        assert!(res.status.success(), "{}: {}", step[0], stderr(&res));
    }
    let samples = fs::read_to_string(d.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("s,t,value,failed"));
    assert!(samples.lines().count() > 9);
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(d.join("ce.manifest.json")).unwrap()).unwrap();
    assert_eq!(m.inputs.len(), 2);
    assert!(fs::metadata(d.join("ce.png")).unwrap().len() > 0);
}

#[test]
fn singular_data_exits_3_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let sim = tvdbar(&["simulate", "--phantom", "pipeline", "--order", "4", "--mesh-rings", "8", "--ell", "5", "--out", p(&data)]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    let n = 9;
    fs::write(data.join("dn.bin"), vec![0u8; 8 * n * n]).unwrap();
    let out = tvdbar(&["scatter", "--dn", p(&data.join("dn.bin")), "--m", "4", "--r", "3", "--r-tilde", "5", "--out",
        p(&d.join("tau.bin"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("scattering transform"), "{}", stderr(&out));
}

#[test]
fn bad_flags_exit_2() {
    let out = tvdbar(&["segment", "--in", "/nonexistent.bin", "--out", "/tmp/x.bin"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tvdbar(&["preview", "--in", "x.bin", "--scale", "2:1", "--out", "x.png"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tvdbar(&["scatter", "--out", "x.bin"]);
    assert_eq!(out.status.code(), Some(2));
}
