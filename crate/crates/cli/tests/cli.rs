use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn goen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goen"))
        .current_dir(dir)
        .env_remove("GOEN_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small synthetic scenario with a fitted model and a briefly trained head.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = goen(
            dir.path(),
            &["--out-dir", ".", "synth", "--seed", "3", "--train-per-class", "60", "--val-per-class", "60", "--test-per-class", "40"],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        Fixture { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        goen(self.path(), args)
    }

    fn fitted(self) -> Self {
        let out = self.run(&["--out-dir", ".", "fit", "--train", "id_train.feat"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let out = self.run(&["--config", "data.toml", "--out-dir", ".", "calibrate", "--model", "model.bin", "--max-epochs", "3"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        self
    }
}

#[test]
fn fit_writes_model_and_summary() {
    let f = Fixture::new();
    let out = f.run(&["--out-dir", "out", "fit", "--train", "id_train.feat"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(f.path().join("out/model.bin").exists());
    let text = stdout(&out);
    assert!(text.contains("class counts: 60 60"), "{text}");
    assert!(text.contains("condition number"), "{text}");
}

#[test]
fn fit_on_unlabelled_file_names_labels() {
    let f = Fixture::new();
    let out = f.run(&["fit", "--train", "hard.feat", "--out", "m.bin"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("labels"), "{}", stderr(&out));
}

#[test]
fn fit_rejects_zero_epsilon() {
    let f = Fixture::new();
    let out = f.run(&["fit", "--train", "id_train.feat", "--epsilon", "0", "--out", "m.bin"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("epsilon"), "{}", stderr(&out));
    assert!(!f.path().join("m.bin").exists());
}

#[test]
fn unknown_flag_and_config_key_rejected() {
    let f = Fixture::new();
    assert_eq!(code(&f.run(&["fit", "--train", "id_train.feat", "--nope"])), 2);
    fs::write(f.path().join("bad.toml"), "[train]\nlearning_rat = 0.1\n").unwrap();
    let out = f.run(&["--config", "bad.toml", "fit", "--train", "id_train.feat"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_refuses_calibration_file_as_eval_set() {
    let f = Fixture::new().fitted();
    let out = f.run(&[
        "--config", "data.toml", "--out-dir", "leak", "eval", "--model", "model.bin", "--head", "head.bin",
        "--ood", "hard_calib.feat",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!f.path().join("leak/report.json").exists());
}

#[test]
fn eval_report_has_average_auroc_and_is_deterministic() {
    let f = Fixture::new().fitted();
    let mut reports = Vec::new();
    for dir in ["r1", "r2"] {
        let out = f.run(&["--config", "data.toml", "--out-dir", dir, "eval", "--model", "model.bin", "--head", "head.bin"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        reports.push(fs::read(f.path().join(dir).join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let json: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert!(json["average_auroc"].as_f64().is_some());
    assert_eq!(json["ood"].as_array().unwrap().len(), 3);
}

#[test]
fn eval_table_uses_metric_rows() {
    let f = Fixture::new().fitted();
    let out = f.run(&[
        "--config", "data.toml", "--out-dir", ".", "eval", "--model", "model.bin", "--head", "head.bin",
        "--format", "table", "--baselines", "energy,knn",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    let header: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(header, ["Metric", "energy", "knn", "GOEN"]);
    assert!(lines[2].starts_with("ID Acc"));
    for label in ["sphere AUROC", "hard AUROC", "noise AUROC", "Avg OOD AUROC", "hard FPR95"] {
        assert!(lines.iter().any(|l| l.starts_with(label)), "{label}");
    }
    // Table on stdout only; JSON goes to files.
    assert!(!text.contains('{'));
    assert!(f.path().join("baselines.json").exists());
}

#[test]
fn out_dir_precedence() {
    let f = Fixture::new();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_goen"));
        cmd.current_dir(f.path()).env_remove("GOEN_OUT_DIR");
        if let Some(e) = env {
            cmd.env("GOEN_OUT_DIR", e);
        }
        if let Some(d) = flag {
            cmd.args(["--out-dir", d]);
        }
        fs::write(f.path().join("c.toml"), "out_dir = \"from_config\"\n").unwrap();
        let out = cmd.args(["--config", "c.toml", "fit", "--train", "id_train.feat"]).output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    };
    run(None, None);
    assert!(f.path().join("from_config/model.bin").exists());
    run(Some("from_env"), None);
    assert!(f.path().join("from_env/model.bin").exists());
    run(Some("from_env2"), Some("from_flag"));
    assert!(f.path().join("from_flag/model.bin").exists());
    assert!(!f.path().join("from_env2").exists());
}

#[test]
fn score_writes_one_value_per_row() {
    let f = Fixture::new().fitted();
    let out = f.run(&["score", "--input", "sphere.feat", "--model", "model.bin", "--head", "head.bin", "--out", "s.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(f.path().join("s.txt")).unwrap();
    let values: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 1000);
    assert!(values.iter().all(|v| *v > 0.0 && *v < 1.0));

    let out = f.run(&["--config", "data.toml", "score", "--input", "sphere.feat", "--rule", "energy"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1000);

    let out = f.run(&["--config", "data.toml", "score", "--input", "sphere.feat", "--rule", "mutual-information"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn inspect_detects_formats() {
    let f = Fixture::new().fitted();
    let expect = [("id_train.feat", "feature file"), ("model.bin", "gaussian model"), ("head.bin", "calibration head")];
    for (file, kind) in expect {
        let out = f.run(&["inspect", file]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).contains(kind), "{file}");
    }
    fs::write(f.path().join("junk.bin"), b"NOTAFILE0000").unwrap();
    assert_eq!(code(&f.run(&["inspect", "junk.bin"])), 2);
}

#[test]
fn ablate_and_seeds_write_reports() {
    let f = Fixture::new();
    let out = f.run(&["--config", "data.toml", "--out-dir", ".", "ablate", "--max-epochs", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let header: Vec<String> = stdout(&out).lines().next().unwrap().split_whitespace().map(String::from).collect();
    assert_eq!(header, ["Metric", "GOEN", "NoiseOnly", "Compact0.9"]);

    let out = f.run(&["--config", "data.toml", "--out-dir", ".", "seeds", "--seeds", "1,1", "--max-epochs", "2", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let avg = json["rows"].as_array().unwrap().iter().find(|r| r["metric"] == "Avg OOD AUROC").unwrap();
    assert_eq!(avg["std"].as_f64().unwrap(), 0.0);
}

#[test]
fn verify_theory_single_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = goen(dir.path(), &["verify-theory", "--only", "conditioning"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("PASS conditioning"), "{text}");

    assert_eq!(code(&goen(dir.path(), &["verify-theory", "--only", "nope"])), 2);
}

#[test]
fn verify_theory_tampered_tolerance_fails_with_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let out = goen(dir.path(), &["verify-theory", "--only", "min-mahalanobis", "--min-maha-tau-min", "1.01"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.starts_with("FAIL min-mahalanobis"), "{text}");
    assert!(text.contains("kendall_tau="), "{text}");
}

#[test]
fn synth_config_points_at_written_files() {
    let f = Fixture::new();
    let text = fs::read_to_string(f.path().join("data.toml")).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    let data = value["data"].as_table().unwrap();
    for key in ["id_train", "id_val", "id_test", "hard_calib", "noise_calib"] {
        let p = PathBuf::from(data[key].as_str().unwrap());
        assert!(f.path().join(p).exists(), "{key}");
    }
}
