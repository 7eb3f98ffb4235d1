use std::path::Path;
use std::process::{Command, Output};

fn impactflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impactflow"))
        .args(args)
        .env("IMPACTFLOW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"{
  "horizon_trades": 20000,
  "n_realizations": 2,
  "t_grid": [16, 32, 64, 128, 256, 512, 1024],
  "fit_range": [16, 1024],
  "a_grid": [0.0, 0.5, 1.0],
  "collapse_t": [64, 128],
  "reference_t": 64,
  "day_block": 2000
}"#;

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&impactflow(&["frobnicate"])), 1);
}

#[test]
fn help_exits_cleanly() {
    let o = impactflow(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("simulate"));
}

#[test]
fn bad_config_exits_with_one_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": {"mu1": 0.7}}"#).unwrap();
    let o = impactflow(&[
        "predict",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("p.csv")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.mu1"));
}

#[test]
fn missing_tape_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = impactflow(&[
        "analyze",
        "--tape",
        s(&dir.path().join("nope.csv")),
        "--out",
        s(&dir.path().join("a")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn predict_writes_the_default_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred.csv");
    let o = impactflow(&["predict", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let hit = rdr.records().map(|r| r.unwrap()).find(|r| {
        &r[0] == "sigma2_exponent" && r[1].parse::<f64>().unwrap() == 0.0 && &r[2] == "1"
    });
    let v: f64 = hit.expect("row present")[3].parse().unwrap();
    assert!((v - 1.5).abs() < 1e-12, "{v}");
}

#[test]
fn selftest_passes() {
    let o = impactflow(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("c.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let tapes = d.join("tapes");
    let o = impactflow(&["simulate", "--config", s(&cfg), "--out", s(&tapes)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tapes.join("tape_000.csv").exists() && tapes.join("tape_001.csv").exists());

    let an = d.join("analysis");
    let o = impactflow(&[
        "analyze",
        "--tape",
        s(&tapes),
        "--config",
        s(&cfg),
        "--out",
        s(&an),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(an.join("measured.csv").exists() && an.join("provenance.json").exists());

    let pred = d.join("pred.csv");
    assert_eq!(
        code(&impactflow(&[
            "predict",
            "--config",
            s(&cfg),
            "--out",
            s(&pred)
        ])),
        0
    );

    let rep = d.join("report.json");
    let o = impactflow(&[
        "report",
        "--measured",
        s(&an),
        "--pred",
        s(&pred),
        "--out",
        s(&rep),
    ]);
    let c = code(&o);
    assert!(
        c == 0 || c == 4,
        "exit {c}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().any(|r| r["statistic"] == "sigma2_exponent"));
    assert!(report["summary"]["checked"].as_u64().unwrap() > 0);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("c.json");
    std::fs::write(&cfg, r#"{"horizon_trades": 5000, "n_realizations": 1}"#).unwrap();
    let run = |name: &str, seed: &str| {
        let out = d.join(name);
        let o = impactflow(&[
            "--seed",
            seed,
            "simulate",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "5");
    let b = run("b.csv", "5");
    let c = run("c.csv", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
