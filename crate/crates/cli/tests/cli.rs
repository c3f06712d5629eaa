use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tpnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpnet")).current_dir(dir).args(args).output().expect("spawn tpnet")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tpnet(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"{
  "data": {
    "train_trajectories": "data/trajectories.csv",
    "train_maps": "data/maps.json",
    "checkpoint": "model.json",
    "train_log": "train_log.json",
    "report": "report.json",
    "report_csv": "report.csv"
  },
  "model": { "mode": "base", "hidden": [12], "seed": 3 },
  "train": { "epochs": 2, "batch_size": 16, "seed": 3 },
  "eval": { "k": 3 }
}
"#;

/// Runs synth, train, eval, predict and plot in `dir`.
fn full_run(dir: &Path) {
    ok(dir, &["synth", "--out-dir", "data", "--scenes", "24", "--seed", "9", "--noise", "0.05", "--families", "cv,turn,two_intention"]);
    fs::write(dir.join("config.json"), CONFIG).unwrap();
    let log = ok(dir, &["train", "--config", "config.json"]);
    assert!(log.contains("epoch   1") && !log.contains("epoch   2"), "{log}");
    let summary = ok(dir, &["eval", "--config", "config.json"]);
    assert!(summary.contains("minFDE@3"), "{summary}");
    ok(dir, &["predict", "--checkpoint", "model.json", "--trajectories", "data/trajectories.csv", "--maps", "data/maps.json", "--k", "2", "--out", "pred.json"]);
    ok(dir, &["plot", "--trajectories", "data/trajectories.csv", "--maps", "data/maps.json", "--scene", "scene_00000", "--predictions", "pred.json", "--out", "scene.svg"]);
}

const ARTIFACTS: [&str; 8] =
    ["data/trajectories.csv", "data/maps.json", "model.json", "train_log.json", "report.json", "report.csv", "pred.json", "scene.svg"];

#[test]
fn end_to_end_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    full_run(a.path());
    full_run(b.path());
    for f in ARTIFACTS {
        let x = fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f} is empty");
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }

    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert!(report["min_fde"].as_f64().unwrap() <= report["fde"].as_f64().unwrap());
    let svg = fs::read_to_string(a.path().join("scene.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn overrides_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    full_run(d);
    ok(d, &["eval", "--config", "config.json", "--no-refine", "--out", "plain.json", "--csv", "plain.csv"]);
    assert_ne!(fs::read(d.join("report.json")).unwrap(), fs::read(d.join("plain.json")).unwrap());
    ok(d, &["train", "--config", "config.json", "--seed", "4", "--checkpoint", "other.json", "--train-log", "other_log.json"]);
    assert_ne!(fs::read(d.join("model.json")).unwrap(), fs::read(d.join("other.json")).unwrap());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: &[&[&str]] = &[
        &["train", "--config", "missing.json"],
        &["synth", "--out-dir", ".", "--families", "hovercraft"],
        &["predict", "--checkpoint", "nope.json", "--trajectories", "nope.csv"],
        &["eval", "--config", "bad.json"],
        &["frobnicate"],
    ];
    fs::write(d.join("bad.json"), r#"{ "train": { "epochz": 3 } }"#).unwrap();
    for args in cases {
        let out = tpnet(d, args);
        assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed no error");
    }

    fs::write(d.join("garbage.json"), "{\"format\": \"tpnet-checkpoint\", \"version\": 1}").unwrap();
    fs::write(d.join("t.csv"), "").unwrap();
    let out = tpnet(d, &["predict", "--checkpoint", "garbage.json", "--trajectories", "t.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
