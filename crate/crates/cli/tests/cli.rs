//! End-to-end tests of the `phlab` binary: exit codes, schema errors,
//! artifact layout, reproducibility and reports.

use std::path::Path;
use std::process::{Command, Output};

fn phlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_experiment_is_a_config_error_listing_the_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"experiment": "nonesuch"}"#);
    // The verb check fires first; the library path reports the registry.
    let o = phlab(&["rods", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let cfg = phlab_cli::ExperimentConfig::new("nonesuch");
    let err = phlab_cli::execute(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    for name in phlab_cli::registry::REGISTRY.iter().map(|e| e.name) {
        assert!(msg.contains(name), "{msg} lacks {name}");
    }
}

#[test]
fn schema_errors_carry_the_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "c.json", r#"{"experiment": "rods", "params": {"n_max": "six"}}"#);
    let o = phlab(&["rods", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.n_max"), "{}", stderr(&o));
    assert!(!out.exists(), "no artifact on a config error");

    let cfg = write_config(tmp.path(), "d.json", r#"{"experiment": "rods", "params": {"n_max": 40}}"#);
    let o = phlab(&["rods", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.n_max"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "e.json", r#"{"experiment": "rods", "sede": 3}"#);
    let o = phlab(&["rods", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sede"), "{}", stderr(&o));
}

#[test]
fn rods_verify_writes_factorial_totals_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rods");
    let cfg = write_config(tmp.path(), "c.json", r#"{"experiment": "rods", "seed": 5, "params": {"n_max": 4, "instances": 20}}"#);
    let o = phlab(&["rods", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("totals.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let n: u64 = f[0].parse().unwrap();
        let fact: u64 = (1..=n).product();
        assert_eq!(f[2].parse::<u64>().unwrap(), fact, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 4 * 20);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["pass"], true);
    assert!(out.join("summary.txt").exists());
}

#[test]
fn warmup_jump_and_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("warm");
    let o = phlab(&["warmup", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!((s["f0"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((s["f_tail"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-4);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"experiment": "gfp", "seed": 11, "params": {"horizon": 5, "replicas": 2000, "probes": [1, 2]}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = phlab(&["gfp", "--config", &cfg, "--out", dir.to_str().unwrap(), "--threads", "1"]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{}", stderr(&o));
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let name = f.as_str().unwrap();
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn exit_code_follows_assertions() {
    let tmp = tempfile::tempdir().unwrap();
    // A coarse grid cannot match the closed form to 1e-6: an assertion fails.
    let cfg = write_config(tmp.path(), "c.json", r#"{"experiment": "warmup", "params": {"h": 0.01, "x_max": 5}}"#);
    let out = tmp.path().join("coarse");
    let o = phlab(&["warmup", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let assertions = manifest["assertions"].as_array().unwrap();
    assert!(assertions.iter().any(|a| a["pass"] == false));
    assert_eq!(manifest["pass"], false);

    let rep = phlab(&["report", out.to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(1));
}

#[test]
fn report_of_single_run_and_of_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("count");
    let cfg = write_config(tmp.path(), "c.json", r#"{"experiment": "rods", "params": {"mode": "count"}}"#);
    let o = phlab(&["rods", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let json = tmp.path().join("report.json");
    let rep = phlab(&["report", out.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(r["rows"].as_array().unwrap().len(), 1);
    assert_eq!(r["pass"], true);

    let empty = phlab(&["report"]);
    assert_eq!(empty.status.code(), Some(0));
}

#[test]
fn missing_artifact_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = phlab(&["report", tmp.path().join("absent").to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn shipped_configs_match_their_schemas() {
    use phlab_cli::accept::AcceptParams;
    use phlab_cli::experiments::*;
    use phlab_cli::ExperimentConfig;

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let cfg = ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let checked = match cfg.experiment.as_str() {
            "rods" => cfg.params::<RodsParams>().map(drop),
            "gfp" => cfg.params::<GfpParams>().map(drop),
            "network" => cfg.params::<NetworkParams>().map(drop),
            "nmp" => cfg.params::<NmpParams>().map(drop),
            "warmup" => cfg.params::<WarmupParams>().map(drop),
            "renewal" => cfg.params::<RenewalParams>().map(drop),
            "selfavg" => cfg.params::<SelfAvgParams>().map(drop),
            "walk" => cfg.params::<WalkParams>().map(drop),
            "accept" => cfg.params::<AcceptParams>().map(drop),
            other => panic!("{}: unknown experiment {other}", path.display()),
        };
        checked.unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if cfg.experiment != "renewal" {
            cfg.service().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        seen += 1;
    }
    assert!(seen >= 9, "only {seen} configs found");
}

#[test]
fn shipped_quick_configs_run_and_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    for (verb, file) in [("rods", "rods_count.json"), ("warmup", "warmup.json"), ("renewal", "renewal.json")] {
        let out = tmp.path().join(verb);
        let o = phlab(&[verb, "--config", dir.join(file).to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{file}: {}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    }
}
