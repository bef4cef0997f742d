use std::path::Path;
use std::process::{Command, Output};

use gridnet::datasets::dataset_load;
use gridnet::network::model_load;

fn gridnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gridnet(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    stdout(&out)
}

/// Parses `key=value` pairs from a metrics line.
fn metric(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {line:?}"))
        .parse()
        .unwrap()
}

#[test]
fn dataset_gen_writes_200_examples_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let line = ok(
        p,
        &[
            "dataset",
            "gen",
            "--kind",
            "digits",
            "--per-class",
            "20",
            "--seed",
            "7",
            "--out",
            "d.json",
        ],
    );
    assert!(line.contains("200 examples"), "{line}");
    let ds = dataset_load(&std::fs::read_to_string(p.join("d.json")).unwrap()).unwrap();
    assert_eq!(ds.len(), 200);

    ok(
        p,
        &[
            "dataset",
            "gen",
            "--kind",
            "digits",
            "--per-class",
            "20",
            "--seed",
            "7",
            "--out",
            "d2.json",
        ],
    );
    assert_eq!(
        std::fs::read(p.join("d.json")).unwrap(),
        std::fs::read(p.join("d2.json")).unwrap()
    );

    ok(
        p,
        &[
            "dataset",
            "gen",
            "--kind",
            "random",
            "--per-class",
            "12",
            "--seed",
            "1",
            "--out",
            "r.json",
        ],
    );
    let r = dataset_load(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r.class_counts(), vec![12]);
}

#[test]
fn dataset_surgery_replace_and_rebalance() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["dataset", "gen", "--seed", "7", "--out", "d.json"]);
    ok(
        p,
        &[
            "dataset",
            "surgery",
            "--in",
            "d.json",
            "--replace-class",
            "0",
            "--seed",
            "9",
            "--out",
            "nd.json",
        ],
    );
    let nd = dataset_load(&std::fs::read_to_string(p.join("nd.json")).unwrap()).unwrap();
    assert_eq!(nd.classes()[0], "not-a-digit");
    assert_eq!(nd.class_counts(), vec![20; 10]);

    ok(
        p,
        &[
            "dataset",
            "surgery",
            "--in",
            "d.json",
            "--rebalance",
            "7=0.1",
            "--seed",
            "3",
            "--out",
            "rb.json",
        ],
    );
    let rb = dataset_load(&std::fs::read_to_string(p.join("rb.json")).unwrap()).unwrap();
    assert_eq!(rb.class_counts()[7], 2);

    let out = gridnet(
        p,
        &["dataset", "surgery", "--in", "d.json", "--out", "x.json"],
    );
    assert_eq!(code(&out), 2);
    let out = gridnet(
        p,
        &[
            "dataset",
            "surgery",
            "--in",
            "d.json",
            "--rebalance",
            "7",
            "--out",
            "x.json",
        ],
    );
    assert_eq!(code(&out), 2);
    let out = gridnet(
        p,
        &[
            "dataset",
            "surgery",
            "--in",
            "d.json",
            "--replace-class",
            "12",
            "--out",
            "x.json",
        ],
    );
    assert_eq!(code(&out), 2);
    let out = gridnet(
        p,
        &[
            "dataset",
            "surgery",
            "--in",
            "missing.json",
            "--replace-class",
            "0",
            "--out",
            "x.json",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("missing.json"));
}

#[test]
fn dataset_gen_flag_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        code(&gridnet(
            p,
            &["dataset", "gen", "--flip-prob", "0.5", "--out", "d.json"]
        )),
        2
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["dataset", "gen", "--kind", "faces", "--out", "d.json"]
        )),
        2
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["dataset", "gen", "--bogus", "--out", "d.json"]
        )),
        2
    );
    std::fs::write(p.join("blocker"), "").unwrap();
    let out = gridnet(p, &["dataset", "gen", "--out", "blocker/d.json"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn train_predict_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["dataset", "gen", "--seed", "42", "--out", "d.json"]);
    let line = ok(
        p,
        &[
            "train",
            "--dataset",
            "d.json",
            "--seed",
            "42",
            "--out-model",
            "m.json",
            "--out-history",
            "h.json",
        ],
    );
    assert!(metric(&line, "train_acc") >= 0.95, "{line}");
    assert!(metric(&line, "val_acc") >= 0.80, "{line}");

    ok(
        p,
        &[
            "train",
            "--dataset",
            "d.json",
            "--seed",
            "42",
            "--out-model",
            "m2.json",
        ],
    );
    assert_eq!(
        std::fs::read(p.join("m.json")).unwrap(),
        std::fs::read(p.join("m2.json")).unwrap()
    );
    assert!(model_load(&std::fs::read_to_string(p.join("m.json")).unwrap()).is_ok());

    let three = ok(p, &["predict", "--model", "m.json", "--image", "glyph:3"]);
    assert!(three.starts_with("class=3 "), "{three}");
    let board = ok(
        p,
        &[
            "predict",
            "--model",
            "m.json",
            "--image",
            "checkerboard",
            "--diagram",
            "dg.svg",
        ],
    );
    let digit = board
        .split_whitespace()
        .next()
        .unwrap()
        .strip_prefix("class=")
        .unwrap();
    assert!(
        digit.len() == 1 && digit.chars().all(|c| c.is_ascii_digit()),
        "{board}"
    );
    assert!(board.contains("probability="));
    let svg = std::fs::read_to_string(p.join("dg.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(
        doc.descendants().filter(|n| n.has_tag_name("rect")).count(),
        66
    );

    let csv = vec!["1"; 35].join(",");
    let out = gridnet(
        p,
        &[
            "predict",
            "--model",
            "m.json",
            "--image",
            &format!("pixels:{csv}"),
        ],
    );
    assert_eq!(code(&out), 2);
    assert_eq!(
        code(&gridnet(
            p,
            &["predict", "--model", "m.json", "--image", "spiral"]
        )),
        2
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["predict", "--model", "m.json", "--image", "file:nope.txt"]
        )),
        1
    );
    assert_eq!(
        code(&gridnet(
            p,
            &[
                "predict",
                "--model",
                "m.json",
                "--image",
                "glyph:1",
                "--classes",
                "a,b"
            ]
        )),
        2
    );

    ok(
        p,
        &["render", "curves", "--history", "h.json", "--out", "c.svg"],
    );
    roxmltree::Document::parse(&std::fs::read_to_string(p.join("c.svg")).unwrap()).unwrap();
    ok(
        p,
        &[
            "render", "diagram", "--model", "m.json", "--input", "glyph:7", "--out", "d7.svg",
        ],
    );
    roxmltree::Document::parse(&std::fs::read_to_string(p.join("d7.svg")).unwrap()).unwrap();
}

#[test]
fn train_usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &["dataset", "gen", "--per-class", "5", "--out", "d.json"],
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["train", "--dataset", "d.json", "--epochs", "0"]
        )),
        2
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["train", "--dataset", "d.json", "--batch", "0"]
        )),
        2
    );
    assert_eq!(
        code(&gridnet(p, &["train", "--dataset", "d.json", "--lr", "-1"])),
        2
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["train", "--dataset", "d.json", "--split", "1.5"]
        )),
        2
    );
    assert_eq!(
        code(&gridnet(
            p,
            &["train", "--dataset", "d.json", "--hidden", "0"]
        )),
        2
    );
    let out = gridnet(p, &["train", "--dataset", "absent.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("absent.json"));
}

#[test]
fn experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = ok(
        p,
        &["experiment", "basic", "--seed", "42", "--out-dir", "runs"],
    );
    assert!(out.contains("4/4 checks passed"), "{out}");
    let run = p.join("runs/basic-seed42");
    for f in [
        "report.json",
        "model.json",
        "history.json",
        "curves.svg",
        "diagram.svg",
    ] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn failing_checks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridnet(
        dir.path(),
        &[
            "experiment",
            "basic",
            "--seed",
            "1",
            "--set",
            "epochs=1",
            "--out-dir",
            "runs",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("train_acc"), "{}", stderr(&out));
    let out = gridnet(dir.path(), &["experiment", "basic", "--set", "momentum=1"]);
    assert_eq!(code(&out), 2);
    let out = gridnet(dir.path(), &["experiment", "faces"]);
    assert_eq!(code(&out), 2);
    let out = gridnet(dir.path(), &["experiment", "basic", "--seeds", "5..2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_prints_tallies() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "experiment",
            "basic",
            "--seeds",
            "1..3",
            "--set",
            "epochs=300",
            "--out-dir",
            "runs",
        ],
    );
    assert!(out.contains("train_acc: 3/3"), "{out}");
    assert!(dir.path().join("runs/basic-seeds1-3.json").is_file());
}
