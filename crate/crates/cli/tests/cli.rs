use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const GRID: &str = r#""grid": {"complex_dim": 2, "points_per_axis": 8}"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(task: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmatorus"))
        .arg(task)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("MA_THREADS")
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn assert_failed_with(o: &Output, out: &Path, kind: &str) {
    assert!(!o.status.success());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], kind, "{err}");
    let file: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(file, err);
    assert!(!out.join("summary.json").exists());
}

#[test]
fn flat_zero_solve_has_trivial_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &format!("{{{GRID}}}"));
    let out = tmp.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["b"].as_f64().unwrap(), 0.0);
    assert!(s["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(s["task"], "solve");
    assert!(out.join("phi.fld").exists());
    assert!(out.join("trace.csv").exists());
    assert!(fs::read_to_string(out.join("run.log")).unwrap().contains("finished"));
}

#[test]
fn solve_outputs_are_bit_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(
            r#"{{{GRID}, "metric": {{"kind": "random", "amplitude": 0.3}},
                "rhs": {{"expr": "0.4*cos(2*pi*(x1 + y2)) - 0.2*sin(2*pi*y1)"}}}}"#
        ),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("solve", &cfg, &a, &["--seed", "9"]).status.success());
    assert!(run("solve", &cfg, &b, &["--seed", "9"]).status.success());
    for name in ["summary.json", "phi.fld", "trace.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let s = summary(&a);
    assert!(s["b"].as_f64().unwrap().abs() <= 0.6 + 1e-8);
}

#[test]
fn identity_fuzzing_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(r#"{{{GRID}, "identities": {{"instances": 200}}}}"#),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("verify-identities", &cfg, &a, &["--seed", "42"]).status.success());
    assert!(run("verify-identities", &cfg, &b, &["--seed", "42"]).status.success());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
    assert_eq!(fs::read(a.join("identities.csv")).unwrap(), fs::read(b.join("identities.csv")).unwrap());
    let s = summary(&a);
    assert_eq!(s["failures"], 0);
    assert_eq!(s["seed"], 42);
    assert_eq!(s["fuzz"]["trace_inequality"]["passed"], 200);
}

#[test]
fn sweep_writes_one_row_per_scale_exponent_and_trial() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(r#"{{{GRID}, "rhs": {{"expr": "0.3*cos(2*pi*x1)*cos(2*pi*y2)"}}}}"#),
    );
    let out = tmp.path().join("out");
    let o = run("sweep", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("s,status,alpha,A,R_alpha,C_A"));
    assert_eq!(lines.len(), 1 + 5 * 5 * 4);
    assert!(lines.iter().skip(1).all(|l| l.split(',').nth(1) == Some("ok")));
    assert_eq!(summary(&out)["entries"].as_array().unwrap().len(), 5);
}

#[test]
fn gauduchon_of_conformal_metric_is_inverse_factor() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(r#"{{{GRID}, "metric": {{"kind": "conformal", "h": "0.2*cos(2*pi*x1)"}}}}"#),
    );
    let out = tmp.path().join("out");
    assert!(run("gauduchon", &cfg, &out, &[]).status.success());
    let s = summary(&out);
    assert!(s["residual"].as_f64().unwrap() <= 1e-8);
    // v = e^{-h} / int e^{-h} e^{2h}, so v_max / v_min = e^{0.4}
    let ratio = s["v_max"].as_f64().unwrap() / s["v_min"].as_f64().unwrap();
    assert!((ratio - 0.4f64.exp()).abs() < 1e-9, "{ratio}");
}

#[test]
fn prescribe_ricci_recovers_manufactured_potential() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(
            r#"{{{GRID}, "metric": {{"kind": "diagonal", "entries": ["exp(0.1*cos(2*pi*y2))", "1"]}},
                "prescription": {{"h": "0.1*sin(2*pi*(x1 - y2))"}}}}"#
        ),
    );
    let out = tmp.path().join("out");
    let o = run("prescribe-ricci", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s["final_ricci_error"].as_f64().unwrap() <= 1e-6);
    assert!(s["constraint_value"].as_f64().unwrap().abs() <= 1e-10);
    assert!(out.join("f.fld").exists() && out.join("psi.fld").exists());
}

#[test]
fn report_reads_a_saved_potential() {
    let tmp = TempDir::new().unwrap();
    let solve_cfg = write_config(
        tmp.path(),
        "solve.json",
        &format!(r#"{{{GRID}, "rhs": {{"expr": "0.5*sin(2*pi*x2)"}}}}"#),
    );
    let first = tmp.path().join("first");
    assert!(run("solve", &solve_cfg, &first, &[]).status.success());
    let b = summary(&first)["b"].as_f64().unwrap();
    let report_cfg = write_config(
        tmp.path(),
        "report.json",
        &format!(
            r#"{{{GRID}, "rhs": {{"expr": "0.5*sin(2*pi*x2)"}},
                "report": {{"phi_file": "first/phi.fld", "b": {b:?}}}}}"#
        ),
    );
    let second = tmp.path().join("second");
    let o = run("report", &report_cfg, &second, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary(&second)["report"], summary(&first)["report"]);
    assert!(fs::read_to_string(second.join("report.csv")).unwrap().starts_with("quantity,parameter,value"));
}

#[test]
fn config_errors_carry_field_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!("{{{GRID},\n \"solver\": {{\"newton_tol\": \"small\"}}}}"),
    );
    let out = tmp.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert_failed_with(&o, &out, "config");
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["path"], "solver.newton_tol");
    assert_eq!(err["line"], 2);
}

#[test]
fn solver_failure_leaves_no_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(
            r#"{{{GRID}, "rhs": {{"expr": "50*cos(2*pi*x1)"}},
                "solver": {{"max_newton_iters": 1, "t_step_min": 0.05}}}}"#
        ),
    );
    let out = tmp.path().join("out");
    // A previous successful run must not leave its summary behind.
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("summary.json"), "{}").unwrap();
    let o = run("solve", &cfg, &out, &[]);
    assert_failed_with(&o, &out, "continuation_stalled");
}

#[test]
fn bad_expression_and_task_mismatch_are_reported() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "expr.json",
        &format!(r#"{{{GRID}, "rhs": {{"expr": "cos(2*pi*x3)"}}}}"#),
    );
    assert_failed_with(&run("solve", &cfg, &out, &[]), &out, "expression");
    let cfg = write_config(tmp.path(), "task.json", &format!(r#"{{{GRID}, "task": "sweep"}}"#));
    assert_failed_with(&run("solve", &cfg, &out, &[]), &out, "task_mismatch");
    let cfg = write_config(tmp.path(), "pr.json", &format!("{{{GRID}}}"));
    assert_failed_with(&run("prescribe-ricci", &cfg, &out, &[]), &out, "missing_input");
}

#[test]
fn invalid_thread_count_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &format!("{{{GRID}}}"));
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_cmatorus"))
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("MA_THREADS", "zero")
        .output()
        .unwrap();
    assert_failed_with(&o, &out, "threads");
    let o = Command::new(env!("CARGO_BIN_EXE_cmatorus"))
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("MA_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
}
