// SPDX-License-Identifier: Apache-2.0

use lderiv::harness::{run, run_with, Command, ResultStore, RunConfig};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::Ordering;

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_text("x = 1000\nsample = 40\nmc_samples = 10000\n# comment\nseed = 7").unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg.cache_dir = None;
    cfg
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn result_files_do_not_depend_on_thread_count() {
    for cmd in [Command::RdStats, Command::Moments, Command::Discrepancy] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut ca = small(a.path());
        ca.threads = Some(1);
        let mut cb = small(b.path());
        cb.threads = Some(3);
        run(&cmd, &ca).unwrap();
        run(&cmd, &cb).unwrap();
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{} output differs between thread counts", cmd.name());
    }
}

#[test]
fn warm_cache_reproduces_cold_run() {
    let cache = tempfile::tempdir().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cold = ResultStore::new(Some(cache.path().to_path_buf()), false);
    run_with(&Command::RdStats, &small(a.path()), &cold).unwrap();
    assert_eq!(cold.counters.hits.load(Ordering::Relaxed), 0);
    assert_eq!(cold.counters.misses.load(Ordering::Relaxed), 40);

    let warm = ResultStore::new(Some(cache.path().to_path_buf()), true);
    run_with(&Command::RdStats, &small(b.path()), &warm).unwrap();
    assert_eq!(warm.counters.hits.load(Ordering::Relaxed), 40);
    assert_eq!(warm.counters.misses.load(Ordering::Relaxed), 0);
    assert_eq!(files(a.path()), files(b.path()));
}

#[test]
fn provenance_header_leads_every_file() {
    let out = tempfile::tempdir().unwrap();
    let cfg = small(out.path());
    run(&Command::Family, &cfg).unwrap();
    run(&Command::Verify, &cfg).unwrap();
    for (name, body) in files(out.path()) {
        let text = String::from_utf8(body).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# lderiv/"), "{name}: {first}");
        assert!(first.contains("\"seed\":7"), "{name}: {first}");
    }
}

#[test]
fn verify_suite_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&Command::Verify, &small(out.path())).unwrap();
    assert_eq!(o.failed, 0, "{}", o.stdout);
    assert_eq!(o.exit_code(true), 0);
}

#[test]
fn report_reads_zero_records() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = small(out.path());
    cfg.sample_size = 10;
    run(&Command::Zeros { sigma_min: None, out: None }, &cfg).unwrap();
    let input = out.path().join("zeros.jsonl");
    run(&Command::Report { input }, &cfg).unwrap();
    let dat = std::fs::read_to_string(out.path().join("report.dat")).unwrap();
    let row: Vec<f64> = dat.lines().find(|l| !l.starts_with('#')).unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(row[0], 1000.0);
    assert!(row[1] >= 0.0);
    assert!((row[2] - 1000f64.ln().ln()).abs() < 1e-12);
}
