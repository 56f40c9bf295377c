//! The `fbde` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fbde::engine::Trace;
use fbde::model::Model;

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Scratch {
        let dir = std::env::temp_dir().join(format!("fbde-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fbde"))
            .args(args)
            .current_dir(&self.0)
            .env("FBDE_LOG", "off")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn fitted(tag: &str) -> Scratch {
    let s = Scratch::new(tag);
    s.ok(&["synth", "--n", "1500", "--seed", "2", "--out", "d.csv"]);
    s.ok(&[
        "fit",
        "--data",
        "d.csv",
        "--sensitive",
        "a",
        "--tau",
        "0.75",
        "--rounds",
        "5",
        "--seed",
        "4",
        "--out",
        "m.json",
    ]);
    s
}

#[test]
fn fit_writes_model_trace_and_manifest() {
    let s = fitted("files");
    let model = Model::load(&s.path("m.json")).unwrap();
    assert_eq!(model.density.num_rounds(), 5);
    assert_eq!(model.manifest.as_deref(), Some("m.manifest.json"));
    let trace = Trace::read_csv(std::fs::File::open(s.path("m.trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.rows.len(), 5);
    let manifest = json(&s.path("m.manifest.json"));
    assert_eq!(manifest["command"], "fit");
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap().to_string())
        .collect();
    assert!(outputs.iter().any(|p| p.ends_with("m.json")));
    assert!(outputs.iter().any(|p| p.ends_with("m.trace.csv")));
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn eval_reproduces_final_trace_row() {
    let s = fitted("eval");
    s.ok(&[
        "eval",
        "--model",
        "m.json",
        "--data",
        "d.csv",
        "--out",
        "metrics.json",
    ]);
    let metrics = json(&s.path("metrics.json"));
    let trace = Trace::read_csv(std::fs::File::open(s.path("m.trace.csv")).unwrap()).unwrap();
    let last = trace.final_row().unwrap();
    let get = |k: &str| metrics[k].as_f64().unwrap();
    assert!((get("rr_normalizers") - last.rr).abs() < 1e-9);
    assert!((get("rr_table") - last.rr).abs() < 1e-9);
    assert!((get("kl_train") - last.kl_train.unwrap()).abs() < 1e-9);
    assert!((get("kl_train_initial") - trace.kl_train_initial.unwrap()).abs() < 1e-9);
    assert_eq!(metrics["kl_unit"], "nats");

    s.ok(&[
        "eval",
        "--model",
        "m.json",
        "--data",
        "d.csv",
        "--bits",
        "--out",
        "bits.json",
    ]);
    let bits = json(&s.path("bits.json"));
    assert!(
        (bits["kl_train"].as_f64().unwrap() * std::f64::consts::LN_2 - get("kl_train")).abs()
            < 1e-12
    );
}

#[test]
fn guarantees_replay_and_strict_mode() {
    let s = fitted("guarantees");
    let stdout = s.ok(&[
        "guarantees",
        "--model",
        "m.json",
        "--trace",
        "m.trace.csv",
        "--data",
        "d.csv",
        "--strict",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["all_ok"], true);
    assert_eq!(report["per_round"].as_array().unwrap().len(), 5);
    assert!(report["per_round"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["rr_ok"] == true));
}

#[test]
fn folds_write_one_model_per_fold() {
    let s = Scratch::new("folds");
    s.ok(&["synth", "--n", "900", "--seed", "1", "--out", "d.csv"]);
    let stdout = s.ok(&[
        "fit",
        "--data",
        "d.csv",
        "--sensitive",
        "a",
        "--tau",
        "0.8",
        "--scheme",
        "relative",
        "--rounds",
        "3",
        "--folds",
        "3",
        "--out",
        "k.json",
    ]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("fold ")).count(), 3);
    for i in 0..3 {
        assert!(s.path(&format!("k.fold{i}.json")).exists());
        let trace =
            Trace::read_csv(std::fs::File::open(s.path(&format!("k.trace.fold{i}.csv"))).unwrap())
                .unwrap();
        assert!(trace.final_row().unwrap().kl_test.is_some());
    }
}

#[test]
fn identical_flags_give_identical_bytes() {
    let a = fitted("det-a");
    let b = fitted("det-b");
    for name in ["d.csv", "m.json", "m.trace.csv"] {
        assert_eq!(
            std::fs::read(a.path(name)).unwrap(),
            std::fs::read(b.path(name)).unwrap(),
            "{name}"
        );
    }
    let c = Scratch::new("det-c");
    c.ok(&["synth", "--n", "1500", "--seed", "2", "--out", "d.csv"]);
    c.ok(&[
        "fit",
        "--data",
        "d.csv",
        "--sensitive",
        "a",
        "--tau",
        "0.75",
        "--rounds",
        "5",
        "--seed",
        "5",
        "--out",
        "m.json",
    ]);
    assert_ne!(
        std::fs::read(a.path("m.json")).unwrap(),
        std::fs::read(c.path("m.json")).unwrap()
    );
}

#[test]
fn bad_inputs_fail_cleanly() {
    let s = fitted("errors");
    let cases: [&[&str]; 4] = [
        &[
            "fit",
            "--data",
            "d.csv",
            "--sensitive",
            "a",
            "--tau",
            "1.5",
            "--out",
            "x.json",
        ],
        &[
            "fit",
            "--data",
            "d.csv",
            "--sensitive",
            "nope",
            "--tau",
            "0.7",
            "--out",
            "x.json",
        ],
        &[
            "fit",
            "--data",
            "missing.csv",
            "--sensitive",
            "a",
            "--tau",
            "0.7",
            "--out",
            "x.json",
        ],
        &["eval", "--model", "d.csv", "--data", "d.csv"],
    ];
    for args in cases {
        let out = s.run(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(
            String::from_utf8_lossy(&out.stderr).starts_with("error: "),
            "{args:?}"
        );
    }
}
