//! Behavior tests for the `matclass` binary: the file-passing contract
//! between subcommands, exit codes, flag handling, and fail-fast checks on
//! versioned files.

use std::path::Path;
use std::process::Command;

use matclass_core::domain::MaterialClass;
use matclass_cli::formats;

const BIN: &str = env!("CARGO_BIN_EXE_matclass");

const TINY_CONFIG: &str = "\
[counts]
metal = 8
plastic = 8
glass = 8
paper = 8
empty = 8

[training]
epochs = 5
";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(cwd: &Path, args: &[&str]) -> Run {
    let output = Command::new(BIN)
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: output.status.code().expect("binary not killed by a signal"),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn write_tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn pipeline_stages_chain_through_default_paths() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());

    for sub in ["generate", "extract", "train", "eval"] {
        let r = run(dir.path(), &["--config", &config, sub]);
        assert_eq!(r.code, 0, "{sub} failed: {}", r.stderr);
    }
    for file in ["windows.jsonl", "features.csv", "model.json", "report.json"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }

    let report = formats::read_report(&dir.path().join("report.json")).unwrap();
    let total: u64 = report.report.matrix.iter().flatten().sum();
    assert_eq!(total, 10, "stratified 30% of 40 records");

    let eval_all = run(dir.path(), &["--config", &config, "eval", "--all-rows"]);
    assert_eq!(eval_all.code, 0, "{}", eval_all.stderr);
    let report = formats::read_report(&dir.path().join("report.json")).unwrap();
    let total: u64 = report.report.matrix.iter().flatten().sum();
    assert_eq!(total, 40);
}

#[test]
fn predict_prints_one_line_per_window_with_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    for sub in ["generate", "extract", "train"] {
        assert_eq!(run(dir.path(), &["--config", &config, sub]).code, 0);
    }
    let r = run(dir.path(), &["--config", &config, "predict"]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), 40);
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 6, "line {line:?}");
        assert!(MaterialClass::from_name(fields[0]).is_ok(), "line {line:?}");
        let probs: Vec<f64> = fields[1..].iter().map(|f| f.parse().unwrap()).collect();
        let sum: f64 = probs.iter().sum();
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)), "line {line:?}");
        // Six printed decimals per probability allow 5 * 5e-7 rounding drift.
        assert!((sum - 1.0).abs() < 3e-6, "probabilities sum to {sum} in {line:?}");
    }

    let out_file = dir.path().join("preds.txt");
    let r2 = run(
        dir.path(),
        &["--config", &config, "predict", "--out", out_file.to_str().unwrap()],
    );
    assert_eq!(r2.code, 0);
    assert_eq!(std::fs::read_to_string(out_file).unwrap(), r.stdout);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["no-such-command"]).code, 1);
    assert_eq!(run(dir.path(), &["generate", "--no-such-flag"]).code, 1);
    assert_eq!(run(dir.path(), &[]).code, 1);

    let help = run(dir.path(), &["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("generate"));
    assert_eq!(run(dir.path(), &["--version"]).code, 0);
}

#[test]
fn config_problems_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["--config", "missing.toml", "generate"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("missing.toml"), "{}", r.stderr);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[training]\nepochs = 0\n").unwrap();
    let r = run(dir.path(), &["--config", bad.to_str().unwrap(), "generate"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("epochs"), "{}", r.stderr);

    std::fs::write(&bad, "[training]\nnot_a_knob = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["--config", bad.to_str().unwrap(), "generate"]).code, 1);
}

#[test]
fn missing_and_tampered_data_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());

    let r = run(dir.path(), &["extract", "nope.jsonl"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("nope.jsonl"), "{}", r.stderr);
    assert_eq!(run(dir.path(), &["train"]).code, 2);
    assert_eq!(run(dir.path(), &["eval"]).code, 2);

    for sub in ["generate", "extract", "train"] {
        assert_eq!(run(dir.path(), &["--config", &config, sub]).code, 0);
    }

    let windows = dir.path().join("windows.jsonl");
    let text = std::fs::read_to_string(&windows).unwrap();
    std::fs::write(&windows, text.replacen("\"format_version\":1", "\"format_version\":9", 1))
        .unwrap();
    let r = run(dir.path(), &["--config", &config, "extract"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("format_version 9"), "{}", r.stderr);

    let features = dir.path().join("features.csv");
    let text = std::fs::read_to_string(&features).unwrap();
    std::fs::write(&features, text.replacen("v1", "v9", 1)).unwrap();
    let r = run(dir.path(), &["--config", &config, "train"]);
    assert_eq!(r.code, 2);

    let model = dir.path().join("model.json");
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(&model, text.replacen("\"format_version\": 1", "\"format_version\": 9", 1))
        .unwrap();
    let r = run(dir.path(), &["--config", &config, "eval"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("format_version 9"), "{}", r.stderr);
}

#[test]
fn eval_rejects_features_shorter_than_the_recorded_split() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    for sub in ["generate", "extract", "train"] {
        assert_eq!(run(dir.path(), &["--config", &config, sub]).code, 0);
    }

    let features = dir.path().join("features.csv");
    let text = std::fs::read_to_string(&features).unwrap();
    let truncated: Vec<&str> = text.lines().take(6).collect();
    std::fs::write(dir.path().join("short.csv"), truncated.join("\n")).unwrap();

    let r = run(dir.path(), &["--config", &config, "eval", "model.json", "short.csv"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("--all-rows"), "{}", r.stderr);
}

#[test]
fn seed_flag_controls_generation_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    for (out, seed) in [("s1a.jsonl", "1"), ("s1b.jsonl", "1"), ("s2.jsonl", "2")] {
        let r = run(
            dir.path(),
            &["--config", &config, "--seed", seed, "generate", "--out", &path(out)],
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let a = std::fs::read(dir.path().join("s1a.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("s1b.jsonl")).unwrap();
    let c = std::fs::read(dir.path().join("s2.jsonl")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the same bytes");
    assert_ne!(a, c, "different seeds must change the data");
}

#[test]
fn quiet_suppresses_informational_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let r = run(dir.path(), &["--config", &config, "--quiet", "generate"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty(), "stdout not empty: {:?}", r.stdout);
}

#[test]
fn demo_below_the_accuracy_gate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("hopeless.toml");
    // A zero learning rate leaves the network at its random initialization.
    std::fs::write(
        &config,
        "[counts]\nmetal = 4\nplastic = 4\nglass = 4\npaper = 4\nempty = 4\n\n\
         [training]\nepochs = 1\nlearning_rate = 0.0\n",
    )
    .unwrap();
    let r = run(dir.path(), &["--config", config.to_str().unwrap(), "demo", "--out", "d"]);
    assert_eq!(r.code, 3, "stdout: {} stderr: {}", r.stdout, r.stderr);
    assert!(r.stderr.contains("below"), "{}", r.stderr);
    assert!(dir.path().join("d/report.json").exists(), "artifacts written before gating");
}
