use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mcsim_core::trace::{generate_trace, render_trace, TracePattern};

fn mcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcsim")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn write_trace(dir: &Path, name: &str) -> String {
    let t = generate_trace(
        TracePattern::RandomUniform {
            threads: 2,
            events_per_thread: 200,
            footprint_blocks: 16,
            store_fraction: 0.4,
        },
        64,
        7,
    );
    let p = dir.join(name);
    fs::write(&p, render_trace(&t)).unwrap();
    s(&p)
}

#[test]
fn version_and_help_exit_zero() {
    let v = mcsim(&["version"]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("mcsim "));
    assert_eq!(mcsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(mcsim(&["laws", "--f", "nope", "--nmax", "4"]).status.code(), Some(1));
    assert_eq!(mcsim(&["laws", "--f", "1.5", "--nmax", "4"]).status.code(), Some(1));
    assert_eq!(mcsim(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_trace_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = mcsim(&["run", "--trace", &s(&tmp.path().join("absent.trc")), "--out", &s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("absent.trc"));
    assert!(!out.exists());
}

#[test]
fn run_writes_summary_and_consistent_message_log() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = write_trace(tmp.path(), "a.trc");
    let out = tmp.path().join("out");
    let r = mcsim(&["run", "--trace", &trace, "--out", &s(&out), "--dump-messages"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let log = fs::read_to_string(out.join("messages.log")).unwrap();
    assert_eq!(
        log.lines().count() as u64,
        summary["shared"]["messages"].as_u64().unwrap()
    );
    assert!(summary["cycles"].as_u64().unwrap() > 0);
    assert!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count() > 1);
}

#[test]
fn sweep_rows_are_sorted_with_analytic_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = write_trace(tmp.path(), "a.trc");
    let out = tmp.path().join("out");
    let r = mcsim(&[
        "sweep",
        "--trace",
        &trace,
        "--n",
        "4,1,2,2",
        "--f",
        "0.5",
        "--out",
        &s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let ns: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(ns, ["1", "2", "4"]);
    let last = &rows[2];
    assert_eq!(last[4].parse::<f64>().unwrap(), 1.6);
    assert_eq!(last[5].parse::<f64>().unwrap(), 2.5);
}

#[test]
fn malformed_litmus_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.lit");
    fs::write(&p, "0 S x 1\n0 Q y r1\n").unwrap();
    let r = mcsim(&["litmus", &s(&p)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));
}

#[test]
fn laws_at_the_extremes() {
    let table = |f: &str, law: &str| -> Vec<f64> {
        let r = mcsim(&["laws", "--f", f, "--nmax", "8", "--law", law]);
        assert!(r.status.success());
        String::from_utf8_lossy(&r.stdout)
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let linear: Vec<f64> = (1..=8).map(f64::from).collect();
    assert_eq!(table("1", "amdahl"), linear);
    assert_eq!(table("1", "gustafson"), linear);
    assert_eq!(table("0", "amdahl"), vec![1.0; 8]);
    assert_eq!(table("0", "gustafson"), vec![1.0; 8]);
}
