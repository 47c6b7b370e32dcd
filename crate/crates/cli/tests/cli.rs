use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ultrametriclab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fundamental_compact_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["verify", "fundamental-compact", "--p", "3", "--alpha", "0.5", "--level", "3", "--tol", "1e-8", "--out", out]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("check,measured,tolerance,pass,runtime_s,detail\n"));
    assert_eq!(report.lines().count(), 2);
    let table = std::fs::read_to_string(dir.path().join("fundamental_compact_p3_alpha0.5.csv")).unwrap();
    assert!(table.starts_with("shell,E_alpha,reconstruction_error\n"));
    // shells −3..=0 of Z_3 at level 3
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn suite_name_without_verify() {
    let o = run(&["fundamental-compact", "--alpha", "2.3", "--level", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn engel_group_axioms_exact() {
    let o = run(&["verify", "group-axioms", "--group", "engel", "--p", "5", "--trials", "1000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("E_4(Q_5)"));
    assert!(stdout(&o).contains("measured 0.000e0"));
}

#[test]
fn heat_table_format() {
    let o = run(&["heat-table", "--group", "qp", "--d", "1", "--alpha", "1", "--p", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,shell,value,estimate_ratio"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 81);
    for r in &rows {
        assert_eq!(r.len(), 4);
        let mantissa = r[2].split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').len(), 18, "17 significant digits in {}", r[2]);
        assert!(r[3].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn heisenberg_heat_table_format() {
    let o = run(&["heat-table", "--group", "heisenberg", "--alpha", "2", "--trunc-M", "2", "--trunc-K", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("t,x,y,z,re,im,trunc_M,trunc_K\n"));
}

#[test]
fn unknown_suite_fails() {
    let o = run(&["verify", "no-such-suite"]);
    assert!(!o.status.success());
    let o = run(&["no-such-suite"]);
    assert!(!o.status.success());
}

#[test]
fn invalid_parameters_name_the_precondition() {
    let o = run(&["group-axioms", "--group", "heisenberg", "--p", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p = 2"), "{}", stderr(&o));
    let o = run(&["fundamental-compact", "--p", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not prime"), "{}", stderr(&o));
    let o = run(&["fundamental-compact", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));
}

#[test]
fn failing_check_exits_nonzero_with_counterexample() {
    let o = run(&["fundamental-compact", "--alpha", "0.5", "--level", "2", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL"));
    assert!(text.contains("first failure: basis function"), "{text}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "p = [2, 3]\nalpha = 0.5\nlevel = 2\n").unwrap();
    let cfg = path.to_str().unwrap();
    let o = run(&["fundamental-compact", "--config", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Z_2") && stdout(&o).contains("Z_3"));
    let o = run(&["fundamental-compact", "--config", cfg, "--p", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Z_5") && !stdout(&o).contains("Z_3"));
}

#[test]
fn reports_are_deterministic_given_the_seed() {
    let measured = |seed: &str| -> Vec<String> {
        let o = run(&["jump-kernel", "--trials", "20", "--seed", seed]);
        assert!(o.status.success());
        // drop the runtime column
        stdout(&o).lines().map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a).to_owned()).collect()
    };
    assert_eq!(measured("7"), measured("7"));
    assert_ne!(measured("7"), measured("8"));
}
