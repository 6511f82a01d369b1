use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quarklets"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV as maps from header to cell.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let (meta, body) = text.split_once('\n').unwrap();
    assert!(meta.starts_with("# quarklets "), "{meta}");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    reader
        .records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn ratios(rows: &[std::collections::HashMap<String, String>]) -> Vec<f64> {
    rows.iter().map(|r| r["ratio"].parse().unwrap()).collect()
}

#[test]
fn build_cardinalities() {
    let o = run(&["build", "--m", "2", "--mtilde", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let j0 = doc["j0"].as_i64().unwrap();
    let first = &doc["levels"][0];
    assert_eq!(first["j"].as_i64().unwrap(), j0);
    assert_eq!(first["delta"].as_i64().unwrap(), (1 << j0) + 1);
    assert_eq!(doc["cardinality_ok"], Value::Bool(true));

    let o = run(&["build", "--m", "2", "--mtilde", "2", "--sigma", "1,1"]);
    let doc2: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc2["levels"][0]["delta"].as_i64().unwrap(), (1 << j0) - 1);
}

#[test]
fn build_serializes_elements_on_request() {
    let o = run(&["build", "--m", "2", "--mtilde", "2", "--jmax", "3", "--elements"]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let els = doc["system"]["elements"].as_array().unwrap();
    assert_eq!(els.len() as u64, doc["total_elements"].as_u64().unwrap());
}

#[test]
fn invalid_parity_exits_2() {
    let o = run(&["build", "--m", "2", "--mtilde", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m + m̃ ∈ 2N"));
}

#[test]
fn verify_default_and_corrupted() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let inv = rep["invariants"].as_array().unwrap();
    let names: std::collections::HashSet<&str> = inv.iter().map(|i| i["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), inv.len());
    assert!(inv.iter().all(|i| i["pass"] == Value::Bool(true)));
    assert!(inv.iter().all(|i| i.get("measured").is_some() && i.get("bound").is_some()));

    let o = run(&["verify", "--corrupt-filter"]);
    assert_eq!(o.status.code(), Some(1));
    let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failed: Vec<&str> = rep["invariants"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|i| i["pass"] == Value::Bool(false))
        .map(|i| i["name"].as_str().unwrap())
        .collect();
    assert!(failed.iter().any(|n| n.contains("vanishing moments")), "{failed:?}");
}

#[test]
fn norms1d_sine_rows_and_ratio_band() {
    let o = run(&["norms1d", "--fn", "sinpi", "--s", "0.5", "--r", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let r = ratios(&rows);
    let (lo, hi) = r.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(lo > 0.0 && hi / lo <= 4.0);
    assert!(rows.iter().all(|r| r["status"] == "ok"));
}

#[test]
fn norms1d_bubble_boundary_flag() {
    let o = run(&["norms1d", "--fn", "bubble", "--sigma", "1,1", "--s", "0.8", "--r", "2", "--jmax", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r["bc_satisfied"] == "true"));
    let o = run(&["norms1d", "--fn", "const", "--sigma", "1,1", "--s", "0.8", "--r", "2", "--jmax", "5"]);
    let rows = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r["bc_satisfied"] == "false"));
}

#[test]
fn norms1d_inadmissible_sigma_marks_rows() {
    // σ = 1 needs s + 1 - 1/r > 1
    let o = run(&["norms1d", "--sigma", "1,1", "--s", "0.4,0.8", "--r", "2", "--jmax", "5"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let bad: Vec<_> = rows.iter().filter(|r| r["s"] == "0.4").collect();
    assert!(bad.iter().all(|r| r["status"].starts_with("error") && r["ratio"] == "NaN"));
    assert!(rows.iter().filter(|r| r["s"] == "0.8").all(|r| r["status"] == "ok"));
}

#[test]
fn smoothness_out_of_range_is_refused() {
    let o = run(&["norms1d", "--s", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("0 < s < m - 1"));
}

#[test]
fn norms2d_bounded_and_monotone_in_rank() {
    let o = run(&["norms2d", "--fn", "sinpi⊗sinpi", "--rank", "3", "--s", "0.5", "--r", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let r = ratios(&rows);
    let (lo, hi) = r.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(lo > 0.0 && hi / lo <= 4.0);
    for j in rows.iter().map(|r| r["J"].clone()).collect::<std::collections::BTreeSet<_>>() {
        let est: Vec<f64> = rows.iter().filter(|r| r["J"] == j).map(|r| r["estimate"].parse().unwrap()).collect();
        assert_eq!(est.len(), 3);
        assert!(est.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
    assert!(rows.iter().all(|r| r["mode"] == "exploratory"));
}

#[test]
fn norms2d_rank_monotone_for_product_function() {
    let o = run(&["norms2d", "--fn", "sinpi*bubble", "--rank", "3", "--jmax", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let est: Vec<f64> = rows.iter().map(|r| r["estimate"].parse().unwrap()).collect();
    assert!(est.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn strict_mode_refuses() {
    let o = run(&["norms2d", "--mode", "strict", "--m", "3", "--mtilde", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m̃ > 5m + 12"));
}

#[test]
fn deterministic_csv_and_threads() {
    let args = ["norms1d", "--s", "0.4,0.8", "--r", "1.5,3", "--jmax", "6", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    let c = run_env(&args, &[("QUARKLET_THREADS", "1")]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let text = stdout(&a);
    let meta = text.lines().next().unwrap();
    assert!(meta.contains("config_hash=") && meta.contains("mode=exploratory") && meta.contains("seed=7"));
    let o2 = run(&["norms2d", "--jmax", "5", "--rank", "2"]);
    let o3 = run_env(&["norms2d", "--jmax", "5", "--rank", "2"], &[("QUARKLET_THREADS", "2")]);
    assert_eq!(o2.stdout, o3.stdout);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"m": 2, "m_tilde": 4, "s": [0.5], "r": [2.0], "fn": "bubble", "sigma": [1, 1], "jmax": 5}"#).unwrap();
    let out = dir.path().join("rows.csv");
    let svg = dir.path().join("chart.svg");
    let o = run(&[
        "norms1d",
        "--config",
        cfg.to_str().unwrap(),
        "--r",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["r"] == "3" && r["bc_satisfied"] == "true"));
    let chart = std::fs::read_to_string(&svg).unwrap();
    assert!(chart.starts_with("<svg") && chart.contains("<polyline"));

    std::fs::write(&cfg, r#"{"m": 2, "unknown": true}"#).unwrap();
    let o = run(&["build", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_function_is_a_config_error() {
    let o = run(&["norms1d", "--fn", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
