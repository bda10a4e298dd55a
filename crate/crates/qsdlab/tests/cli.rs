use std::path::Path;
use std::process::Command;

use qsdlab::validate::data_files;
use qsdlab::ExperimentConfig;

const SMALL_QSD: &str = r#"
[model]
kind = "logistic"
[model.killing]
kind = "min_one"
[numerics]
seed = 42
grid_nodes = 200
n_particles = 1000
t_end = 1.0
n_paths = 20000
horizon = 4.0
eta_paths = 100
eta_x = [0.5, 1.0]
"#;

fn qsdlab(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qsdlab")).args(args).current_dir(dir).env_remove("QSDLAB_THREADS").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn qsd_writes_declared_files_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "q.toml", SMALL_QSD);
    for out in ["a", "b"] {
        let (code, err) = qsdlab(&["qsd", "--config", &cfg, "--out", out], tmp.path());
        assert_eq!(code, 0, "{err}");
    }
    let a = data_files(&tmp.path().join("a")).unwrap();
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["summary.json", "alpha.csv", "tv.csv", "survival.csv"] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    assert_eq!(a, data_files(&tmp.path().join("b")).unwrap());
    assert!(tmp.path().join("a/run.log").exists());

    let alpha = std::fs::read_to_string(tmp.path().join("a/alpha.csv")).unwrap();
    assert!(alpha.starts_with("x,alpha_hat,alpha_spectral,eta_hat,eta_spectral"));
}

#[test]
fn seed_flag_and_thread_env_behave() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "q.toml", SMALL_QSD);
    assert_eq!(qsdlab(&["qsd", "--config", &cfg, "--out", "a"], tmp.path()).0, 0);
    assert_eq!(qsdlab(&["qsd", "--config", &cfg, "--out", "b", "--seed", "43"], tmp.path()).0, 0);
    let out = Command::new(env!("CARGO_BIN_EXE_qsdlab"))
        .args(["qsd", "--config", &cfg, "--out", "c"])
        .current_dir(tmp.path())
        .env("QSDLAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    let a = std::fs::read(tmp.path().join("a/alpha.csv")).unwrap();
    assert_ne!(a, std::fs::read(tmp.path().join("b/alpha.csv")).unwrap());
    assert_eq!(a, std::fs::read(tmp.path().join("c/alpha.csv")).unwrap());
    assert!(std::fs::read_to_string(tmp.path().join("c/run.log")).unwrap().contains("threads=3"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_kind = write(tmp.path(), "k.toml", "[model]\nkind = \"moran\"\n[numerics]\nseed = 1\n");
    assert_eq!(qsdlab(&["classify", "--config", &bad_kind], tmp.path()).0, 4);
    let no_seed = write(tmp.path(), "s.toml", "[model]\nkind = \"logistic\"\n[numerics]\n");
    assert_eq!(qsdlab(&["classify", "--config", &no_seed], tmp.path()).0, 4);
    assert_eq!(qsdlab(&["classify", "--config", "missing.toml"], tmp.path()).0, 4);
    assert_eq!(qsdlab(&["frobnicate", "--config", &no_seed], tmp.path()).0, 4);

    // Jump models have no spectral Q-process: numeric error, report kept.
    let jump = write(tmp.path(), "j.toml", "[model]\nkind = \"jump_extended\"\n[numerics]\nseed = 1\n");
    let (code, err) = qsdlab(&["qprocess", "--config", &jump, "--out", "j"], tmp.path());
    assert_eq!(code, 3, "{err}");
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("j/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["incomplete"], true);
    assert_eq!(summary["results"], serde_json::json!({}));

    // Output below a regular file cannot be created.
    let ok = write(tmp.path(), "ok.toml", "[model]\nkind = \"logistic\"\n[numerics]\nseed = 1\n");
    write(tmp.path(), "blocker", "");
    assert_eq!(qsdlab(&["classify", "--config", &ok, "--out", "blocker/sub"], tmp.path()).0, 1);
}

#[test]
fn classify_logistic_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[model]\nkind = \"logistic\"\n[model.killing]\nkind = \"min_one\"\n[numerics]\nseed = 1\n");
    assert_eq!(qsdlab(&["classify", "--config", &cfg, "--out", "o"], tmp.path()).0, 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(v["results"]["boundaries"]["entrance_at_infinity"], "holds");
}

#[test]
fn criteria_on_oscillating_killing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[model]\nkind = \"logistic\"\n[model.killing]\nkind = \"oscillating\"\n[numerics]\nseed = 1\n");
    let (code, err) = qsdlab(&["criteria", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(v["results"]["statuses"]["logistic_model"], "satisfied");
    assert_eq!(v["results"]["all_stable"], true);
    assert!(tmp.path().join("o/criteria.json").exists());
}

#[test]
fn coming_down_column_is_non_increasing() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[model]\nkind = \"natural_scale\"\n[model.killing]\nkind = \"constant\"\nc = 1.0\n[numerics]\nseed = 5\nfeller_paths = 2000\ncoming_down_paths = 500\n";
    let cfg = write(tmp.path(), "n.toml", text);
    assert_eq!(qsdlab(&["coming_down", "--config", &cfg, "--out", "o"], tmp.path()).0, 0);
    let csv = std::fs::read_to_string(tmp.path().join("o/coming_down.csv")).unwrap();
    let est: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(est.len(), 5);
    assert!(est.windows(2).all(|w| w[1] <= w[0]), "{est:?}");
}

#[test]
fn shipped_configs_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let cfg = ExperimentConfig::load(&p).unwrap();
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::parse(&text).unwrap().to_toml(), text, "{}", p.display());
            n += 1;
        }
    }
    assert!(n >= 2);
}
