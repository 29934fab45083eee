use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use goddard_id::cli_io::{load_reference, parse_runspec, run, LoadError, RunConfig, RunError};
use goddard_id::dynamics::ModelParams;

fn goddard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goddard-id"))
        .args(args)
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn without_timing(summary: &str) -> String {
    summary
        .lines()
        .filter(|l| !l.starts_with("solve_wall_time_s"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn toy_run_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = goddard(&["run", "5.3.5.E.0.002", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        listing(dir.path()),
        [
            "5.3.5.E.0.002.policy.csv",
            "5.3.5.E.0.002.summary.txt",
            "5.3.5.E.0.002.trajectory.csv"
        ]
    );
    let summary = fs::read_to_string(dir.path().join("5.3.5.E.0.002.summary.txt")).unwrap();
    for key in ["terminal_mass:", "fuel_burned:", "subarcs:", "solve_wall_time_s:"] {
        assert!(summary.contains(key), "summary lacks {key}");
    }
    let policy = fs::read_to_string(dir.path().join("5.3.5.E.0.002.policy.csv")).unwrap();
    assert!(policy.starts_with("segment,v_idx,m_idx,u\n"));

    let t = load_reference(dir.path().join("5.3.5.E.0.002.trajectory.csv"))
        .unwrap()
        .trajectory;
    assert_eq!(t.samples.len(), 6);
    t.check_invariants(&ModelParams::default()).unwrap();
}

#[test]
fn flag_form_matches_name_form() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(goddard(&["run", "5.3.5.RK.0.002", "--out", a.path().to_str().unwrap()])
        .status
        .success());
    let out = goddard(&[
        "run",
        "--nv",
        "5",
        "--nu",
        "3",
        "--nm",
        "5",
        "--method",
        "RK",
        "--dh",
        "0.002",
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let name = "5.3.5.RK.0.002.trajectory.csv";
    assert_eq!(
        fs::read(a.path().join(name)).unwrap(),
        fs::read(b.path().join(name)).unwrap()
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let spec = parse_runspec("11.5.11.G.0.0025").unwrap();
    let cfg = RunConfig::default();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, _) = run(&spec, &cfg, None, a.path()).unwrap();
    run(&spec, &cfg, None, b.path()).unwrap();
    first.trajectory.check_invariants(&cfg.params).unwrap();
    for suffix in ["trajectory.csv", "policy.csv"] {
        let name = format!("{}.{suffix}", spec.name());
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name}"
        );
    }
    let name = format!("{}.summary.txt", spec.name());
    assert_eq!(
        without_timing(&fs::read_to_string(a.path().join(&name)).unwrap()),
        without_timing(&fs::read_to_string(b.path().join(&name)).unwrap())
    );
}

#[test]
fn emitted_trajectory_reloads_bit_exactly() {
    let spec = parse_runspec("21.5.21.RK.0.001").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (outcome, _) = run(&spec, &RunConfig::default(), None, dir.path()).unwrap();
    let back = load_reference(dir.path().join(format!("{}.trajectory.csv", spec.name()))).unwrap();
    assert_eq!(back.trajectory.samples, outcome.trajectory.samples);
}

#[test]
fn comparison_file_against_own_output_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(goddard(&["run", "5.3.5.E.0.002", "--out", d]).status.success());
    let traj = dir.path().join("5.3.5.E.0.002.trajectory.csv");
    let again = dir.path().join("again");
    let out = goddard(&[
        "run",
        "5.3.5.E.0.002",
        "--out",
        again.to_str().unwrap(),
        "--reference",
        traj.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(again.join("5.3.5.E.0.002.compare.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("profile,max_abs_dev,rms_dev"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0, "{row}");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0, "{row}");
    }
}

#[test]
fn wrong_reference_span_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("short.csv");
    fs::write(&reference, "h,u,v,m\n1.0,-3.5,0.01,1.0\n1.005,0,0.1,0.7\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = goddard(&[
        "run",
        "5.3.5.E.0.002",
        "--out",
        out_dir.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("span mismatch"));
    assert!(!out_dir.exists() || listing(&out_dir).is_empty());
}

#[test]
fn infeasible_discretization_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = goddard(&["run", "2.2.2.E.0.01", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(listing(dir.path()).is_empty());

    let err = run(
        &parse_runspec("2.2.2.E.0.01").unwrap(),
        &RunConfig::default(),
        None,
        dir.path(),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = goddard(&["run", "5.3.5.E.0.002", "--out", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(dir.path()), ["file"]);
}

#[test]
fn usage_errors_exit_1() {
    let out = goddard(&["parse", "101.11.101.X.0.0005"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown method X"));
    assert_eq!(goddard(&["run", "5.3.5.E.0.003"]).status.code(), Some(1));
    assert_eq!(goddard(&["run"]).status.code(), Some(1));
    assert_eq!(goddard(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        goddard(&["run", "5.3.5.E.0.002", "--reference", "/nonexistent/ref.csv"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn parse_echoes_fields() {
    let out = goddard(&["parse", "101.11.101.E.0.0005"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("nv=101 nu=11 nm=101 method=E dh=0.0005"));
    assert!(text.contains("name=101.11.101.E.0.0005"));
}

#[test]
fn convergence_prints_the_study() {
    let out = goddard(&["convergence", "--method", "RK"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("method,steps,dh,error\n"));
    let order: f64 = text
        .lines()
        .last()
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((3.5..=4.5).contains(&order));
}

#[test]
fn parameter_overrides_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = goddard(&[
        "run",
        "21.5.21.E.0.001",
        "--out",
        d,
        "--u-min",
        "-2",
        "--m-payload",
        "0.7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = load_reference(dir.path().join("21.5.21.E.0.001.trajectory.csv"))
        .unwrap()
        .trajectory;
    assert!(t.samples.iter().all(|s| s.u >= -2.0 && s.m >= 0.7));
    assert!(t.samples.iter().any(|s| s.u == -2.0));
    let bad = goddard(&["run", "5.3.5.E.0.002", "--out", d, "--cd", "-1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn reference_loader_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.csv");
    fs::write(
        &ok,
        "h,u,v,m,time\n1.0,-3.5,0.0,1.0,0\n1.005,-1.0,0.1,0.7,1\n1.01,0.0,0.05,0.65,2\n",
    )
    .unwrap();
    let r = load_reference(&ok).unwrap();
    assert_eq!(r.trajectory.samples.len(), 3);
    assert_eq!(r.trajectory.samples[2].m, 0.65);
    assert!(r.provenance.ends_with("ok.csv"));

    let bad = dir.path().join("bad.csv");
    let mut text = String::from("h,u,v,m\n");
    for h in [1.0, 1.001, 1.002, 1.003, 1.004, 1.005, 1.0049, 1.01] {
        text.push_str(&format!("{h},0,0.1,1\n"));
    }
    fs::write(&bad, text).unwrap();
    let e = load_reference(&bad).unwrap_err();
    assert!(matches!(e, LoadError::NonMonotone { row: 7, .. }));

    let e = load_reference(dir.path().join("missing.csv")).unwrap_err();
    assert_eq!(RunError::from(e).exit_code(), 3);
}
