use std::path::Path;
use std::process::Command;

use physarum_cli::{run, EXIT_FAILED, EXIT_OK, EXIT_USAGE};
use physarum_sdp::io::write_problem;
use physarum_sdp::report::RunReport;
use physarum_sdp::{SdpProblem, SymMatrix};

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("physarum").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn e1() -> SdpProblem {
    SdpProblem::new(SymMatrix::diagonal(&[1.0, 2.0]), vec![SymMatrix::identity(2)], vec![1.0]).unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn k3_generate_solve_check() {
    let dir = tempfile::tempdir().unwrap();
    let k3 = dir.path().join("k3.dat-s");
    let report = dir.path().join("k3.report.json");
    assert_eq!(cli(&["gen", "max-cut", "--n", "3", "--m", "3", "--seed", "1", "--out", p(&k3)]), EXIT_OK);
    assert_eq!(cli(&["solve", p(&k3), "--ansatz", "second", "--algorithm", "vanilla", "--report", p(&report)]), EXIT_OK);

    let r = read_json(&report);
    // K3 relaxation: min tr((5I − W)X) over diag(X) = 1 is 15 − 9 = 6.
    let obj = r["summary"]["objective"].as_f64().unwrap();
    assert!((obj - 6.0).abs() <= 1e-2, "objective {obj}");
    assert!(r["summary"]["gap"].as_f64().unwrap() <= 1e-2);
    assert!((r["summary"]["cut_value"].as_f64().unwrap() - 9.0).abs() <= 1e-2);
    assert_eq!(r["status"], "CONVERGED");

    assert_eq!(cli(&["check", p(&report)]), EXIT_OK);
}

#[test]
fn e1_json_solves_with_every_combination() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e1.json");
    write_problem(&e1(), &path).unwrap();
    for ansatz in ["first", "second"] {
        for algorithm in ["vanilla", "modified"] {
            let report = dir.path().join(format!("{ansatz}-{algorithm}.json"));
            let code = cli(&["solve", p(&path), "--ansatz", ansatz, "--algorithm", algorithm, "--report", p(&report)]);
            assert_eq!(code, EXIT_OK, "{ansatz}/{algorithm}");
            let obj = read_json(&report)["summary"]["objective"].as_f64().unwrap();
            assert!((obj - 1.0).abs() <= 1e-2, "{ansatz}/{algorithm}: {obj}");
        }
    }
}

#[test]
fn tampered_report_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e1.json");
    let report = dir.path().join("run.json");
    write_problem(&e1(), &path).unwrap();
    assert_eq!(cli(&["solve", p(&path), "--ansatz", "second", "--report", p(&report)]), EXIT_OK);
    assert_eq!(cli(&["check", p(&report)]), EXIT_OK);

    let mut r = read_json(&report);
    r["certificate"]["objective"] = serde_json::json!(0.5);
    std::fs::write(&report, serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(cli(&["check", p(&report)]), EXIT_FAILED);
}

#[test]
fn budget_exhaustion_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e1.json");
    write_problem(&e1(), &path).unwrap();
    assert_eq!(cli(&["solve", p(&path), "--max-iters", "2"]), EXIT_FAILED);
}

#[test]
fn usage_and_io_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(cli(&[]), EXIT_USAGE);
    assert_eq!(cli(&["solve"]), EXIT_USAGE);
    assert_eq!(cli(&["solve", p(&missing)]), EXIT_USAGE);
    assert_eq!(cli(&["check", p(&missing)]), EXIT_USAGE);
    assert_eq!(cli(&["gen", "max-cut", "--n", "3", "--m", "3", "--out", p(&dir.path().join("x.txt"))]), EXIT_USAGE);
    assert_eq!(cli(&["gen", "triangle", "--n", "3", "--m", "3", "--out", p(&missing)]), EXIT_USAGE);
    assert_eq!(cli(&["solve", p(&missing), "--ansatz", "third"]), EXIT_USAGE);
    assert_eq!(cli(&["--help"]), EXIT_OK);
}

#[test]
fn sweep_writes_table_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("probs");
    let reports = dir.path().join("reports");
    std::fs::create_dir(&probs).unwrap();
    for seed in 1..=3 {
        let out = probs.join(format!("mc{seed}.dat-s"));
        assert_eq!(cli(&["gen", "max-cut", "--n", "5", "--m", "6", "--seed", &seed.to_string(), "--out", p(&out)]), EXIT_OK);
    }
    write_problem(&e1(), probs.join("e1.json")).unwrap();

    let code = cli(&["sweep", p(&probs), "--ansatz", "second", "--report-dir", p(&reports)]);
    assert_eq!(code, EXIT_OK);
    // A run may stop with a certificate that misses the slack threshold, so
    // only require every report to be self-consistent.
    for name in ["mc1", "mc2", "mc3", "e1"] {
        let r = RunReport::read(reports.join(format!("{name}.report.json"))).unwrap();
        assert!(r.verify().unwrap().mismatches.is_empty(), "{name}");
        assert!(r.summary.gap.unwrap() < 1e-2, "{name}");
    }
    assert_eq!(cli(&["check", p(&reports.join("e1.report.json"))]), EXIT_OK);
}

#[test]
fn binary_honours_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    write_problem(&e1(), dir.path().join("e1.json")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_physarum"))
        .args(["sweep", p(dir.path()), "--ansatz", "second"])
        .env("PHYSARUM_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("e1.json"), "{table}");
    assert!(table.contains("gap < 1e-2: 1/1"), "{table}");
}
