use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "seed": 3,
  "data": {"synth": {"class_counts": [40, 60, 30], "d_continuous": 4, "d_genotype": 1, "informative_features": [0, 4]}},
  "model": {"kind": "random_forest", "hyperparameters": {"n_trees": 8, "max_depth": 3}},
  "evaluation": {"outer_k": 3, "inner_k": 2, "kinds": ["random_forest", "tree"]},
  "explain": {"max_instances": 6, "background_size": 10, "shap_samples": 32},
  "causality": {"top_k": 2, "max_contexts": 3, "n_cf_values": [1, 2],
                "generators": [{"generator": "permute_attack", "generations": 10}]}
}"#;

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unixplain"))
        .args(args)
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap()
}

fn setup() -> (tempfile::TempDir, std::path::PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    (tmp, config)
}

fn error_kind(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn unify_without_model_bundle_fails_with_json_error() {
    let (tmp, config) = setup();
    let out_dir = tmp.path().join("out");
    for step in ["synth", "preprocess"] {
        assert!(run(&[step], &config, &out_dir).status.success());
    }
    let out = run(&["unify"], &config, &out_dir);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "missing_model_bundle");
}

#[test]
fn preprocess_before_synth_reports_missing_artifact() {
    let (tmp, config) = setup();
    let out = run(&["preprocess"], &config, &tmp.path().join("empty"));
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "missing_artifact");
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let (tmp, _) = setup();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"seed": 1, "bogus": true}"#).unwrap();
    let out = run(&["synth"], &bad, &tmp.path().join("out"));
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "config");
}

#[test]
fn evaluate_is_reproducible_and_seed_sensitive() {
    let (tmp, config) = setup();
    let dirs: Vec<_> = ["a", "b"].iter().map(|d| tmp.path().join(d)).collect();
    for dir in &dirs {
        for step in ["synth", "preprocess", "evaluate"] {
            let out = run(&[step], &config, dir);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let a = std::fs::read(dirs[0].join("cv_summary.json")).unwrap();
    assert_eq!(a, std::fs::read(dirs[1].join("cv_summary.json")).unwrap());

    let c = tmp.path().join("c");
    for step in ["synth", "preprocess", "evaluate"] {
        let out = Command::new(env!("CARGO_BIN_EXE_unixplain"))
            .args([step, "--config", config.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "4"])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_ne!(a, std::fs::read(c.join("cv_summary.json")).unwrap());
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["payload"]["classifiers"].as_array().unwrap().len(), 2);
    assert_eq!(summary["payload"]["comparisons"].as_array().unwrap().len(), 2);
}

#[test]
fn explain_methods_write_artifacts() {
    let (tmp, config) = setup();
    let out_dir = tmp.path().join("out");
    for step in ["synth", "preprocess", "train"] {
        assert!(run(&[step], &config, &out_dir).status.success());
    }
    for (method, stem) in [("shap", "shap"), ("lime", "lime"), ("pdp", "pdp"), ("gini", "gini"), ("cf-frequency", "cf_frequency")] {
        let out = run(&["explain", "--method", method], &config, &out_dir);
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join(format!("explain_{stem}.json")).exists());
    }
    assert!(run(&["unify"], &config, &out_dir).status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("run_manifest.json")).unwrap()).unwrap();
    assert!(manifest.to_string().contains("causality_report.json"));
}
