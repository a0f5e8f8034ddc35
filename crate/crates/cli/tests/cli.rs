// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn lderiv(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lderiv"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("LDERIV_CACHE_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eval_at_one_matches_class_number_formula() {
    let dir = tempfile::tempdir().unwrap();
    let o = lderiv(dir.path(), &["eval", "--d", "8", "--s", "1", "--deriv", "--oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let l = v["l"][0].as_f64().unwrap();
    assert!((l - (1.0 + 2f64.sqrt()).ln() / 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn usage_and_domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["eval", "--d", "9", "--s", "0.7"][..],
        &["eval", "--d", "8", "--s", "a,b"],
        &["--set", "seed=-3", "family"],
        &["--set", "no_such_key=1", "family"],
        &["frobnicate"],
        &["fekete", "--check-identity"],
    ] {
        let o = lderiv(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lderiv(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lderiv(dir.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    assert!(dir.path().join("verify.csv").exists());
}

#[test]
fn family_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lderiv(dir.path(), &["--x", "1000,10000", "family"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("|D(x)| = 200"), "{text}");
    assert!(text.contains("|D(x)| = 2029"), "{text}");
}

#[test]
fn rd_stats_is_byte_identical_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = ["--x", "1000,10000", "--sample", "30", "rd-stats"];
    let oa = lderiv(a.path(), &[&["--threads", "1"][..], &common].concat());
    let ob = lderiv(b.path(), &[&["--threads", "4"][..], &common].concat());
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(ob.status.code(), Some(0));
    for f in ["rd_stats.csv", "rd_histogram.csv", "rd_mean.dat", "rd_records.jsonl"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zeros_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = lderiv(dir.path(), &["--x", "1000", "--sample", "12", "zeros"]);
    assert_eq!(o.status.code(), Some(0));
    let jsonl = dir.path().join("zeros.jsonl");
    let lines = std::fs::read_to_string(&jsonl).unwrap();
    assert_eq!(lines.lines().filter(|l| !l.starts_with('#')).count(), 12);
    let o = lderiv(dir.path(), &["report", "--in", jsonl.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("report.dat").exists());
}

#[test]
fn report_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"hello\": 1}\n").unwrap();
    let o = lderiv(dir.path(), &["report", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fekete_explicit_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = lderiv(dir.path(), &["fekete", "--d", "8,40568", "--count-zeros"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fekete.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "8,0,0"), "{csv}");
    assert!(csv.lines().any(|l| l.starts_with("40568,") && !l.starts_with("40568,0,")), "{csv}");
}
