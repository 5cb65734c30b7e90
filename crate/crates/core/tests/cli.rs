use std::process::Command;

fn libcod() -> Command {
    Command::new(env!("CARGO_BIN_EXE_libcod"))
}

#[test]
fn solve_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let status = libcod()
        .args(["solve", "--synthetic", "m=200,n=100", "--lambda", "1e-3", "--blocks", "10", "--max-iters", "500"])
        .args(["--no-wall-clock", "--trace-out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn exit_codes() {
    assert_eq!(libcod().arg("--help").status().unwrap().code(), Some(0));
    assert_eq!(libcod().arg("nonsense").output().unwrap().status.code(), Some(1));
    let out = libcod().args(["solve", "--synthetic", "m=10,n=5", "--lambda", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn sweep_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"dataset": {"synthetic": {"m": 40, "n": 20}}, "formulation": "sqlog", "lambdas": [0.001],
            "block_sizes": [5], "solvers": ["libcod-monotone", "proxcd"], "repeats": 2, "max_iters": 30, "accuracy_targets": [0.5],
            "wall_clock": false}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = libcod().args(["sweep", "--spec"]).arg(&spec).arg("--output-dir").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(out_dir.join("runs.csv").exists());
}
