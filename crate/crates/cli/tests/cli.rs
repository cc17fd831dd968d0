use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn invexopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invexopt")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn run(config: &Path, out: &Path) -> Output {
    invexopt(&["run", "--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `(iter, objective)` columns of a trace file.
fn objectives(dir: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,objective,grad_norm,step_norm,elapsed_ms"));
    lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

fn without_elapsed(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("trace.csv"))
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn identical_configs_give_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        r#"{"problem": "dag", "algorithm": "igd", "dims": {"d": 8}, "seed": 4, "max_iter": 200}"#,
        r#"{"problem": "fair_lasso", "algorithm": "pigd", "dims": {"n": 20, "d": 5}, "seed": 4, "max_iter": 30, "generator": {"sparsity": 2}}"#,
        r#"{"problem": "mlr", "algorithm": "pgd", "dims": {"n": 15, "d": 3}, "seed": 4, "max_iter": 30}"#,
    ];
    for (i, json) in configs.iter().enumerate() {
        let config = write_config(tmp.path(), &format!("c{i}.json"), json);
        let (a, b) = (tmp.path().join(format!("a{i}")), tmp.path().join(format!("b{i}")));
        assert!(run(&config, &a).status.success());
        assert!(run(&config, &b).status.success());
        assert_eq!(without_elapsed(&a), without_elapsed(&b), "{json}");
        assert_eq!(std::fs::read(a.join("instance.json")).unwrap(), std::fs::read(b.join("instance.json")).unwrap());
    }
}

#[test]
fn unknown_problem_is_a_config_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "bad.json", r#"{"problem": "lasso", "algorithm": "igd", "dims": {"d": 3}, "seed": 1}"#);
    let out = tmp.path().join("out");
    let res = run(&config, &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());

    let res = invexopt(&["verify", "--problem", "lasso", "--output", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn mismatched_algorithm_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config =
        write_config(tmp.path(), "c.json", r#"{"problem": "fair_lasso", "algorithm": "igd", "dims": {"n": 5, "d": 2}, "seed": 1}"#);
    let out = tmp.path().join("out");
    assert_eq!(run(&config, &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn zero_step_keeps_the_fair_objective_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"problem": "fair_lasso", "algorithm": "pigd", "dims": {"n": 20, "d": 5}, "seed": 3, "alpha": 0, "max_iter": 10, "generator": {"sparsity": 2}}"#,
    );
    let out = tmp.path().join("out");
    assert!(run(&config, &out).status.success());
    let obj = objectives(&out);
    assert_eq!(obj.len(), 11);
    assert!(obj.iter().all(|&v| v == obj[0]), "{obj:?}");
}

#[test]
fn dag_trace_is_monotone_and_reaches_the_target() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"problem": "dag", "algorithm": "igd", "dims": {"d": 20}, "seed": 7, "alpha": 1e-3, "max_iter": 20000,
            "objective_target": 1e-3, "generator": {"init": "sparse_cyclic", "edge_prob": 0.1}}"#,
    );
    let out = tmp.path().join("out");
    assert!(run(&config, &out).status.success());
    let obj = objectives(&out);
    assert!(obj.windows(2).all(|w| w[1] <= w[0]), "objective increased");
    assert!(*obj.last().unwrap() <= 1e-3);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["status"], "converged");
    assert_eq!(report["iterations_to_target"].as_u64().unwrap() as usize, obj.len() - 1);
}

#[test]
fn solver_failure_exits_one_with_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.json", r#"{"problem": "dag", "algorithm": "gd", "dims": {"d": 6}, "seed": 2, "alpha": 1e4, "max_iter": 50}"#);
    let out = tmp.path().join("out");
    assert_eq!(run(&config, &out).status.code(), Some(1));
    let report = read_json(&out.join("report.json"));
    assert!(matches!(report["status"].as_str(), Some("diverged" | "step_solve_failed")), "{report}");
    assert!(!objectives(&out).is_empty());
}

#[test]
fn default_step_comes_from_the_smoothness_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "c.json",
        r#"{"problem": "custom_quadratic", "algorithm": "gd", "dims": {"d": 4}, "seed": 1, "generator": {"curvature_min": 0.5, "curvature_max": 2.0}}"#,
    );
    let out = tmp.path().join("out");
    assert!(run(&config, &out).status.success());
    let step = &read_json(&out.join("report.json"))["step"];
    assert_eq!(step["source"], "smoothness");
    assert!((step["alpha"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn comparison_runs_share_the_initial_point() {
    let tmp = tempfile::tempdir().unwrap();
    let a = r#"{"problem": "mlr", "algorithm": "pigd", "dims": {"n": 30, "d": 4}, "seed": 5, "max_iter": 100, "grad_tol": 0}"#;
    let pa = write_config(tmp.path(), "a.json", a);
    let pb = write_config(tmp.path(), "b.json", &a.replace("pigd", "pgd"));
    let out = tmp.path().join("out");
    let res = invexopt(&["compare", "--config-a", pa.to_str().unwrap(), "--config-b", pb.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let init_a = std::fs::read(out.join("a/initial_point.json")).unwrap();
    assert_eq!(init_a, std::fs::read(out.join("b/initial_point.json")).unwrap());
    let ra = read_json(&out.join("a/report.json"));
    let rb = read_json(&out.join("b/report.json"));
    assert_eq!(ra["step"]["alpha"], rb["step"]["alpha"]);

    let report = read_json(&out.join("compare.json"));
    let threshold = report["threshold"].as_f64().unwrap();
    let worse = ra["final_objective"].as_f64().unwrap().max(rb["final_objective"].as_f64().unwrap());
    assert_eq!(threshold, worse);
    let (ka, kb) = (report["a"]["iterations_to_threshold"].as_f64().unwrap(), report["b"]["iterations_to_threshold"].as_f64().unwrap());
    assert_eq!(report["ratio"].as_f64().unwrap(), ka / kb);

    let pc = write_config(tmp.path(), "c.json", &a.replace("pigd", "pgd").replace("\"seed\": 5", "\"seed\": 6"));
    let res = invexopt(&["compare", "--config-a", pa.to_str().unwrap(), "--config-b", pc.to_str().unwrap(), "--output", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn verify_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dag");
    assert!(invexopt(&["verify", "--problem", "dag", "--seed", "7", "--output", out.to_str().unwrap()]).status.success());
    let report = read_json(&out.join("verify.json"));
    assert!(report["invexity"]["worst_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(report["invexity"]["samples_tested"], 1000);
    assert_eq!(report["triangle"]["violations"], 0);

    let out = tmp.path().join("fair");
    assert!(invexopt(&["verify", "--problem", "fair_lasso", "--seed", "7", "--output", out.to_str().unwrap()]).status.success());
    let report = read_json(&out.join("verify.json"));
    assert_eq!(report["contraction"]["fair"]["violations"], 0);
    assert_eq!(report["contraction"]["fair"]["samples_tested"], 500);
}
