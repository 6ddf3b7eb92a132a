use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn edfq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edfq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_preset_with(dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut cfg: Value = serde_json::from_str(edfq::config::PRESET).unwrap();
    edit(&mut cfg);
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(edfq(&["--help"]).status.code(), Some(0));
    assert_eq!(edfq(&["no-such-command"]).status.code(), Some(1));
    let bad = edfq(&["simulate", "--service", "cauchy"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("cauchy"));
}

#[test]
fn empty_system_snapshot() {
    let out = edfq(&[
        "simulate",
        "--arrivals",
        "none",
        "--horizon",
        "5",
        "--snapshot",
        "4",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let snap = &v["snapshots"][0];
    assert_eq!(snap["time"], 4.0);
    assert_eq!(snap["workload"], 0.0);
    assert_eq!(snap["frontier"], 26.0);
    assert_eq!(snap["late_work"], 0.0);
}

#[test]
fn covariance_row_at_y_star_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = edfq(&[
        "--out",
        dir.path().to_str().unwrap(),
        "covariance",
        "--law",
        "constant",
        "--ystar",
        "3",
        "--y-grid",
        "0:3:7",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("covariance_covariance.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("y1,y2,cov_j,cov_y,cov_z,gap"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 49);
    for r in rows.iter().filter(|r| r[0] == 3.0 || r[1] == 3.0) {
        assert_eq!(&r[2..5], &[0.0, 0.0, 0.0]);
    }
    for r in &rows {
        assert!(r[5].abs() <= 1e-8);
    }
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"version\": 1,\n  \"bogus\": 3\n}\n").unwrap();
    let out = edfq(&["--config", path.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("bogus"), "{err}");

    std::fs::write(&path, "{\n  \"version\": 1,\n  \"base_seed\": \n}\n").unwrap();
    let out = edfq(&["--config", path.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn table1_check_passes_for_exponential() {
    let out = edfq(&[
        "table1",
        "--service",
        "exponential",
        "--seed",
        "7",
        "--check",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    let mass = v["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "continuous_mass")
        .unwrap();
    assert!((mass["theory"].as_f64().unwrap() - 0.2865).abs() < 1e-4);
    assert_eq!(mass["passed"], true);
}

#[test]
fn failed_check_exits_two_and_thresholds_come_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset_with(dir.path(), |v| {
        v["thresholds"]["proportion_sigmas"] = 0.0.into()
    });
    let args = [
        "--config",
        cfg.as_str(),
        "table1",
        "--service",
        "gamma",
        "--replications",
        "100",
    ];
    assert_eq!(
        edfq(&[&args[..], &["--check"]].concat()).status.code(),
        Some(2)
    );
    // without --check a failed comparison is only reported
    assert_eq!(edfq(&args).status.code(), Some(0));
}

#[test]
fn output_files_are_reproducible() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, workers) in dirs.iter().zip(["1", "2"]) {
        let out = edfq(&[
            "--seed",
            "5",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
            "--format",
            "csv",
            "--format",
            "json",
            "--format",
            "svg",
            "qq-lateness",
            "--service",
            "uniform",
            "--replications",
            "300",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let listing = |d: &Path| {
        let mut names: Vec<_> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        names
    };
    let names = listing(dirs[0].path());
    assert_eq!(names, listing(dirs[1].path()));
    assert!(names.iter().any(|n| n.to_string_lossy().ends_with(".svg")));
    for name in names {
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
    }
}

#[test]
fn only_requested_formats_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = edfq(&[
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
        "collapse",
        "--n-list",
        "4,16,64",
        "--replications",
        "20",
    ]);
    assert!(out.status.success());
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["collapse.json".to_string()]);
}
