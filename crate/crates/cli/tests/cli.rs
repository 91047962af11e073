use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_500.csv")
}

fn qfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfe"))
        .args(args)
        .env("QFE_LOG", "error")
        .output()
        .expect("run qfe")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn score(dir: &Path, extra: &[&str]) -> Output {
    let input = fixture();
    let mut args = vec!["score", "-i", input.to_str().unwrap(), "-o", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    qfe(&args)
}

#[test]
fn score_report_has_contract_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = score(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    for key in ["schema", "config", "frames", "sigma", "delta", "tau"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["schema"], 1);
    assert_eq!(r["frames"], 500);
    assert_eq!(r["tau"].as_array().unwrap().len(), 500);
    assert_eq!(r["config"]["qfe"]["combine"]["lambda_k"], serde_json::json!([100.0, 100.0, 50.0]));
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert!(csv.starts_with("frame,sigma,delta_lm,delta_hp,delta_gaze,tau\n"));
    assert!(dir.path().join("tau.svg").exists());
}

#[test]
fn score_with_factor_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(score(dir.path(), &["--factor"]).status.code(), Some(0));
    let f = &report(dir.path())["factor"];
    for key in ["bartlett_chi2", "bartlett_df", "bartlett_p", "kmo_overall"] {
        assert!(f["diagnostics"].get(key).is_some(), "missing {key}");
    }
    for key in ["loadings", "uniquenesses", "converged"] {
        assert!(f["model"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(f["model"]["loadings"].as_array().unwrap().len(), 4);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = score(dir.path(), &["--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn conflicting_combination_flags_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(score(dir.path(), &["--lambda-k", "1,1,1", "--weights", "1,1,1,1"]).status.code(), Some(1));
    assert_eq!(score(dir.path(), &["--approach", "weighted-sum", "--lambda-k", "1,1,1"]).status.code(), Some(1));
    assert_eq!(score(dir.path(), &["--lambda-k", "1,1"]).status.code(), Some(1));
    assert_eq!(score(dir.path(), &["--lambda", "-3"]).status.code(), Some(1));
}

#[test]
fn repeated_list_flag_keeps_the_last_value() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(score(dir.path(), &["--lambda-k", "1,2", "--lambda-k", "7,8,9"]).status.code(), Some(0));
    assert_eq!(report(dir.path())["config"]["qfe"]["combine"]["lambda_k"], serde_json::json!([7.0, 8.0, 9.0]));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfe(&["score", "-i", "/no/such/file.csv", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("qfe.toml");
    std::fs::write(
        &cfg,
        format!(
            "[score]\ninput = {:?}\nlambda = 50\nstride = 10\nlambda_k = [1, 1, 1]\n",
            fixture().to_str().unwrap()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = qfe(&["--config", cfg.to_str().unwrap(), "score", "-o", out_dir.to_str().unwrap(), "--stride", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let q = &report(&out_dir)["config"]["qfe"];
    assert_eq!(q["spatial"]["lambda"], 50.0);
    assert_eq!(q["temporal"]["stride"], 3);
    assert_eq!(q["combine"]["lambda_k"], serde_json::json!([1.0, 1.0, 1.0]));
}

#[test]
fn bad_config_value_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("qfe.toml");
    std::fs::write(&cfg, "[score]\nlambda = \"lots\"\n").unwrap();
    let out = qfe(&["--config", cfg.to_str().unwrap(), "score", "-i", fixture().to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

fn write_series(path: &Path, name: &str, values: impl Iterator<Item = f64>) {
    let mut s = format!("{name}\n");
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn granger_lag_beyond_segment_capacity_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("context.csv");
    let r = dir.path().join("response.csv");
    write_series(&c, "context", (0..1000).map(|t| (t as f64 * 0.37).sin()));
    write_series(&r, "tau", (0..1000).map(|t| (t as f64 * 0.21).cos()));
    let out = qfe(&[
        "granger", "--context", c.to_str().unwrap(), "--response", r.to_str().unwrap(),
        "--segment-frames", "40", "--lags-frames", "20", "-o", dir.path().join("g").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));
}

#[test]
fn granger_seconds_must_map_to_whole_samples() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("context.csv");
    write_series(&c, "context", (0..100).map(|t| t as f64));
    let out = qfe(&["granger", "--context", c.to_str().unwrap(), "--response", c.to_str().unwrap(), "--lags-seconds", "0.3", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn subjectivity_writes_every_metric() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir(&input).unwrap();
    for (k, name) in ["S02", "S01", "S03"].iter().enumerate() {
        let f = (k + 1) as f64;
        write_series(&input.join(format!("{name}.csv")), "tau", (0..120).map(|t| 50.0 + 10.0 * (t as f64 / (5.0 * f)).sin() + f));
    }
    let out_dir = dir.path().join("out");
    let out = qfe(&["subjectivity", "--input-dir", input.to_str().unwrap(), "-o", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r["subjects"], serde_json::json!(["S01", "S02", "S03"]));
    for m in ["marpe", "dtw", "srcc", "ccc"] {
        assert!(r["metrics"].get(m).is_some());
        let csv = std::fs::read_to_string(out_dir.join(format!("{m}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("subject,S01,S02,S03"));
        assert!(out_dir.join(format!("{m}_heatmap.svg")).exists());
    }
}

#[test]
fn subjectivity_needs_two_subjects() {
    let dir = tempfile::tempdir().unwrap();
    write_series(&dir.path().join("only.csv"), "tau", (0..10).map(|t| t as f64));
    let out = qfe(&["subjectivity", "--input-dir", dir.path().to_str().unwrap(), "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablate_and_simulate_emit_reports() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let a = dir.path().join("ablate");
    assert_eq!(qfe(&["ablate", "-i", f.to_str().unwrap(), "-o", a.to_str().unwrap()]).status.code(), Some(0));
    let r = report(&a);
    assert_eq!(r["matrices"].as_array().unwrap().len(), 4);
    assert_eq!(r["omitted"], serde_json::json!(["LM3D"]));

    let s = dir.path().join("simulate");
    let out = qfe(&["simulate", "-i", f.to_str().unwrap(), "-o", s.to_str().unwrap(), "--mitigate", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&s);
    assert_eq!(r["anomaly"]["perturbed_indices"].as_array().unwrap().len(), 10);
    assert_eq!(r["config"]["perturbation"]["seed"], 9);
    for name in ["clean", "noise_perturbed", "anomaly_mitigated"] {
        assert!(s.join(format!("{name}.csv")).exists());
    }
    assert!(s.join("sigma_kde.svg").exists());
}

#[test]
fn simulate_rejects_bad_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfe(&["simulate", "-i", fixture().to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--anomaly-fraction", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(qfe(&["--help"]).status.code(), Some(0));
    assert_eq!(qfe(&["granger", "--help"]).status.code(), Some(0));
}
