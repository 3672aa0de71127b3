use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn multiplicity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiplicity"))
        .args(args)
        .output()
        .expect("spawn multiplicity")
}

fn toy_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let data = root().join("data");
    let text = std::fs::read_to_string(root().join("configs/toy.toml"))
        .unwrap()
        .replace("../data/", &format!("{}/", data.display()));
    let path = dir.join("campaign.toml");
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn audit_writes_all_report_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path(), |t| t);
    let out_dir = tmp.path().join("out");
    let out = multiplicity(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "report.json",
        "pairs.csv",
        "explanations.jsonl",
        "timing.json",
    ] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["format"], "multiplicity-report");
    assert_eq!(report["seed_pairs"].as_array().unwrap().len(), 4);
    let pairs = std::fs::read_to_string(out_dir.join("pairs.csv")).unwrap();
    assert!(pairs.starts_with("dataset,model_class,setting,fold,instance,run_a,run_b,"));
}

#[test]
fn oversized_k_is_rejected_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path(), |t| t.replace("k = 2", "k = 5"));
    let out_dir = tmp.path().join("out");
    let out = multiplicity(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("k"));
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn dry_run_only_echoes_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path(), |t| t);
    let out_dir = tmp.path().join("out");
    let out = multiplicity(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--dry-run",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("model_class = \"logreg\""));
    assert!(!out_dir.exists());
}

#[test]
fn campaigns_without_any_seed_refuse_to_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path(), |t| t.replace("seed = 7\n", ""));
    let out_dir = tmp.path().join("out");
    let args = [
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ];
    let out = multiplicity(&args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let mut with_seed = args.to_vec();
    with_seed.extend(["--seed", "7", "--dry-run"]);
    assert!(multiplicity(&with_seed).status.success());
}

#[test]
fn baseline_with_zero_dispersion_is_degenerate() {
    let out = multiplicity(&[
        "baseline",
        "jaccard_topk",
        "--seed",
        "1",
        "--qs",
        "0",
        "--n-samples",
        "500",
    ]);
    assert!(out.status.success());
    let band: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(band["lower"], 0.0);
    assert_eq!(band["upper"], 0.0);
}

#[test]
fn baseline_defaults_and_seed_policy() {
    let a = multiplicity(&["baseline", "l2", "--seed", "3"]);
    let b = multiplicity(&["baseline", "l2", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let band: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    // rho in {0.6, 0.7, 0.8} times kappa in 5..=15.
    assert_eq!(band["points"].as_array().unwrap().len(), 33);
    assert!(band["lower"].as_f64().unwrap() < band["upper"].as_f64().unwrap());

    assert!(!multiplicity(&["baseline", "rbo"]).status.success());
    assert!(
        !multiplicity(&["baseline", "l2", "--seed", "3", "--qs", "0.3"])
            .status
            .success()
    );
}

#[test]
fn train_then_explain() {
    let tmp = tempfile::tempdir().unwrap();
    let data = root().join("data");
    let (csv, schema) = (data.join("toy.csv"), data.join("toy.schema.toml"));
    let (csv, schema) = (csv.to_str().unwrap(), schema.to_str().unwrap());
    let model = tmp.path().join("model.json");
    let model = model.to_str().unwrap();
    let out = multiplicity(&[
        "train",
        "--data",
        csv,
        "--schema",
        schema,
        "--model-class",
        "dtree",
        "--model-seed",
        "2",
        "--fixed",
        "--out",
        model,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let explain = |extra: &[&str]| {
        let mut args = vec![
            "explain",
            "--model",
            model,
            "--data",
            csv,
            "--schema",
            schema,
            "--background-size",
            "25",
        ];
        args.extend_from_slice(extra);
        multiplicity(&args)
    };
    assert!(!explain(&["--index", "3"]).status.success());
    assert!(!explain(&["--index", "100000", "--explainer-seed", "1"])
        .status
        .success());

    let out = explain(&["--index", "3", "--explainer-seed", "1", "--exact"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["explainer"], "exact");
    assert_eq!(v["explanation"]["explainer_seed"], 1);
    assert_eq!(v["explanation"]["model_seed"], 2);
    assert_eq!(v["top_k"].as_array().unwrap().len(), 3);
    assert!(v["efficiency_residual"].as_f64().unwrap() <= 1e-7);

    // Three features: the kernel budget covers every coalition, so it matches exact.
    let kernel = explain(&["--index", "3", "--explainer-seed", "1"]);
    let k: serde_json::Value = serde_json::from_slice(&kernel.stdout).unwrap();
    for (a, b) in k["explanation"]["phi"]
        .as_array()
        .unwrap()
        .iter()
        .zip(v["explanation"]["phi"].as_array().unwrap())
    {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() <= 1e-8);
    }
}

#[test]
fn dissect_writes_side_by_side() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path(), |t| t);
    let out_dir = tmp.path().join("out");
    let out = multiplicity(&[
        "dissect",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("dissect.json")).unwrap())
            .unwrap();
    assert_eq!(doc["side_by_side"].as_array().unwrap().len(), 4);
    assert!(stdout(&out).contains("explainer_induced"));
}
