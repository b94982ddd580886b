//! End-to-end tests of the command-line surface: exit codes, config
//! precedence, snapshot round trips, and byte-identical reruns.

use std::path::Path;
use std::process::{Command, Output};

fn fnlw(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnlw"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn unknown_subcommand_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(&["frobnicate"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(&["sample", "--frequency", "3"], dir.path());
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--frequency"), "{stderr}");
}

#[test]
fn alpha_out_of_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(&["sample", "--alpha", "1.5"], dir.path());
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("alpha"), "{stderr}");
}

#[test]
fn undersized_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(&["sample", "--N", "4", "--grid", "9"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn sample_then_evolve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(
        &["sample", "--N", "2", "--samples", "2", "--seed", "11", "--out", "snaps"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let snap = dir.path().join("snaps/sample_000000.fnlw");
    assert!(snap.exists());

    let out = fnlw(
        &[
            "evolve",
            "--N",
            "2",
            "--T",
            "0.05",
            "--dt",
            "0.01",
            "--in",
            snap.to_str().unwrap(),
            "--out",
            "run",
            "--strichartz",
            "--p",
            "4",
            "--q",
            "4",
            "--s",
            "0.7",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/trajectory.fnlw").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/evolve.json")).unwrap())
            .unwrap();
    assert!(json["results"]["strichartz"]["gamma"].is_number());
}

#[test]
fn inadmissible_strichartz_pair_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(
        &[
            "evolve", "--N", "2", "--T", "0.02", "--dt", "0.01", "--strichartz", "--p", "3",
            "--q", "3", "--out", "run",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2/p + 2/q"), "{stderr}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "alpha = 0.8\nn = 2\nsamples = 1\n").unwrap();
    let out = fnlw(
        &["sample", "--config", "run.cfg", "--alpha", "0.85", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = std::fs::read_to_string(dir.path().join("o/run.cfg")).unwrap();
    assert!(echoed.contains("alpha = 0.85"), "{echoed}");
    assert!(echoed.contains("n = 2"), "{echoed}");
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out_dir: &str, workers: &str| {
        let out = fnlw(
            &[
                "cauchy-rate",
                "--cutoffs",
                "2,4",
                "--reference",
                "8",
                "--samples",
                "300",
                "--seed",
                "7",
                "--workers",
                workers,
                "--out",
                out_dir,
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(out_dir).join("cauchy-rate.json")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b, "JSON reports differ across worker counts");
}

#[test]
fn tail_command_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnlw(
        &[
            "tail",
            "--N",
            "2",
            "--samples",
            "2000",
            "--seed",
            "3",
            "--lambda-grid",
            "1,5,25,125",
            "--out",
            "t",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("t/tail.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5); // header + 4 lambdas
}
