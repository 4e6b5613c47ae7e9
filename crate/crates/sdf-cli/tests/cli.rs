//! End-to-end tests driving the `sdf` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sdf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdf"))
}

fn run(args: &[&str]) -> Output {
    sdf().args(args).output().expect("spawn sdf")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small two-class samples CSV with enough structure to train on.
fn write_samples(dir: &Path) -> PathBuf {
    let path = dir.join("samples.csv");
    let mut text = String::new();
    let mut state = 9u64;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5
    };
    for i in 0..24 {
        let class = i % 2;
        let base = class as f64 * 2.0;
        text.push_str(&format!(
            "{},{},{},c{}\n",
            base + next(),
            base + next(),
            base + next(),
            class
        ));
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn prepare(dir: &Path) -> (PathBuf, PathBuf) {
    let samples = write_samples(dir);
    let pairs = dir.join("pairs.csv");
    assert_ok(&run(&[
        "pairs",
        "--input",
        samples.to_str().unwrap(),
        "--n",
        "40",
        "--balance",
        "0.5",
        "--seed",
        "11",
        "--out",
        pairs.to_str().unwrap(),
    ]));
    (samples, pairs)
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(
        &path,
        r#"{"max_levels": 2, "trees_per_forest": 5, "cv_folds": 3}"#,
    )
    .unwrap();
    path
}

#[test]
fn pairs_deterministic_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_samples(dir.path());
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        assert_ok(&run(&[
            "pairs",
            "--input",
            samples.to_str().unwrap(),
            "--n",
            "10",
            "--balance",
            "0.5",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    let a = std::fs::read(&out_a).unwrap();
    assert_eq!(a, std::fs::read(&out_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    let similar = rows.iter().filter(|r| r.ends_with(",0")).count();
    assert_eq!(similar, 5);
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = run(&["pairs", "--n", "10", "--out", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_model_and_descent_log() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, pairs) = prepare(dir.path());
    let cfg = small_config(dir.path());
    let model = dir.path().join("model.json");
    let out = run(&[
        "train",
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--seed",
        "5",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(model.exists());

    let log = std::fs::read_to_string(dir.path().join("model.log")).unwrap();
    let mut qp_lines = 0;
    for line in log.lines() {
        if line.contains("objective_uniform") {
            qp_lines += 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let uniform: f64 = fields[fields.iter().position(|f| *f == "objective_uniform").unwrap() + 1]
                .parse()
                .unwrap();
            let fin: f64 = fields[fields.iter().position(|f| *f == "objective_final").unwrap() + 1]
                .parse()
                .unwrap();
            assert!(fin <= uniform + 1e-12, "{line}");
        }
    }
    assert!(qp_lines >= 12, "expected one line per slot/fold, got {qp_lines}");
}

#[test]
fn baseline_flag_keeps_uniform_weights() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, pairs) = prepare(dir.path());
    let cfg = small_config(dir.path());
    let model = dir.path().join("baseline.json");
    assert_ok(&run(&[
        "train",
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--seed",
        "5",
        "--config",
        cfg.to_str().unwrap(),
        "--baseline",
    ]));
    let loaded = sdf_core::load_model(&model).unwrap();
    assert!(loaded.config().baseline);
    for level in loaded.levels() {
        for forest in level.forests() {
            let t = forest.n_trees() as f64;
            assert!(forest.weights().iter().all(|&w| w == 1.0 / t));
        }
    }
}

#[test]
fn predict_row_count_and_tau_bands() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, pairs) = prepare(dir.path());
    let cfg = small_config(dir.path());
    let model = dir.path().join("model.json");
    assert_ok(&run(&[
        "train",
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--seed",
        "5",
        "--config",
        cfg.to_str().unwrap(),
    ]));

    let verdicts = dir.path().join("verdicts.csv");
    assert_ok(&run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--tau",
        "0",
        "--out",
        verdicts.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&verdicts).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "i,j,diff,label");
    assert_eq!(rows.len() - 1, 40);
    // tau = 0: binary rule only.
    assert!(rows[1..]
        .iter()
        .all(|r| r.ends_with(",similar") || r.ends_with(",dissimilar")));

    // tau = 10 exceeds the maximum possible margin, so every nonnegative
    // diff becomes undetermined.
    assert_ok(&run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--tau",
        "10",
        "--out",
        verdicts.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&verdicts).unwrap();
    for row in text.lines().skip(1) {
        let diff: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        let label = row.split(',').nth(3).unwrap();
        if diff >= 0.0 {
            assert_eq!(label, "undetermined", "{row}");
        } else {
            assert_eq!(label, "dissimilar", "{row}");
        }
    }
}

#[test]
fn predict_rejects_width_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, pairs) = prepare(dir.path());
    let cfg = small_config(dir.path());
    let model = dir.path().join("model.json");
    assert_ok(&run(&[
        "train",
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--seed",
        "5",
        "--config",
        cfg.to_str().unwrap(),
    ]));
    // Samples with one feature fewer.
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "1.0,2.0,c0\n2.0,1.0,c1\n3.0,1.0,c0\n").unwrap();
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--samples",
        narrow.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_and_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Missing input file: data error.
    let out = run(&[
        "pairs",
        "--input",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--n",
        "10",
        "--out",
        dir.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown config key: config error.
    let (samples, pairs) = prepare(dir.path());
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"max_level": 3}"#).unwrap();
    let out = run(&[
        "train",
        "--samples",
        samples.to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
        "--config",
        bad_cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // Non-numeric feature cell: data error with position.
    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "1.0,abc,c0\n2.0,1.0,c1\n").unwrap();
    let out = run(&[
        "pairs",
        "--input",
        bad_csv.to_str().unwrap(),
        "--n",
        "4",
        "--out",
        dir.path().join("p2.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 1") && stderr.contains("column 1"), "{stderr}");
}

#[test]
fn experiment_json_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let samples = write_samples(dir.path());
    let cfg = small_config(dir.path());
    let report_a = dir.path().join("a.json");
    let report_b = dir.path().join("b.json");
    for report in [&report_a, &report_b] {
        assert_ok(&run(&[
            "experiment",
            "--data",
            samples.to_str().unwrap(),
            "--t",
            "4",
            "--n",
            "14",
            "--reps",
            "2",
            "--lambdas",
            "0.01,0.1",
            "--mode",
            "both",
            "--seed",
            "77",
            "--config",
            cfg.to_str().unwrap(),
            "--quiet",
            "--out",
            report.to_str().unwrap(),
        ]));
    }
    let a = std::fs::read(&report_a).unwrap();
    assert_eq!(a, std::fs::read(&report_b).unwrap());

    // Sanity on the payload: accuracies in [0, 1], repetition count echoed.
    let value: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(value["spec"]["repetitions"], 2);
    for cell in value["cells"].as_array().unwrap() {
        let accs = cell["accuracies"].as_array().unwrap();
        assert_eq!(accs.len(), 2);
        for acc in accs {
            let acc = acc.as_f64().unwrap();
            assert!((0.0..=1.0).contains(&acc));
        }
    }
}
