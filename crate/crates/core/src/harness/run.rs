// SPDX-License-Identifier: Apache-2.0

//! Subcommand drivers. Each writes its files under `out_dir`, every file
//! starting with the provenance line of the run configuration.

use super::config::RunConfig;
use super::store::{record_key, write_atomic, JsonlWriter, ResultStore};
use super::verify;
use crate::characters::{enumerate_family, Family, FundamentalDiscriminant};
use crate::error::{Error, RangePolicy, Result};
use crate::fekete::{fekete_real_zeros, mellin_identity_check, MELLIN_MAX_D};
use crate::lfunc::{euler_maclaurin_oracle, LEngine};
use crate::par;
use crate::primes::primes_up_to;
use crate::randmodel::{moment_rand, prime_indicator, MomentBudget, DEFAULT_TAIL_TOLERANCE};
use crate::stats::{
    central_moments, discrepancy_of, empirical_distribution, large_sieve_check, mc_distribution, moment_lhs, rd_record, rd_statistics_with,
    sample_family, EmpiricalDistribution, RdRecord, DISTRIBUTION_C,
};
use crate::zeros::{count_real_zeros, gamma_min, hypothesis_ld_check, GammaMin, HypothesisLd, NuPolicy, ZeroRecord};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Family,
    Eval { d: u64, s: Complex64, deriv: bool, oracle: bool },
    Zeros { sigma_min: Option<f64>, out: Option<PathBuf> },
    GammaMin,
    Fekete { d: Vec<u64>, count_zeros: bool, identity_s: Option<f64> },
    Discrepancy,
    Moments,
    RdStats,
    Report { input: PathBuf },
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Family => "family",
            Command::Eval { .. } => "eval",
            Command::Zeros { .. } => "zeros",
            Command::GammaMin => "gamma-min",
            Command::Fekete { .. } => "fekete",
            Command::Discrepancy => "discrepancy",
            Command::Moments => "moments",
            Command::RdStats => "rd-stats",
            Command::Report { .. } => "report",
            Command::Verify => "verify",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Text for standard output.
    pub stdout: String,
    /// Per-`d` results that were flagged, excluded or left with suspects.
    pub indeterminate: usize,
    /// Failed checks (`verify`).
    pub failed: usize,
}

impl Outcome {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.failed > 0 || (strict && self.indeterminate > 0) {
            2
        } else {
            0
        }
    }
}

/// Exit status of a finished run.
pub fn exit_code(result: &Result<Outcome>, strict: bool) -> i32 {
    match result {
        Ok(o) => o.exit_code(strict),
        Err(e) => e.exit_code(),
    }
}

/// Run `cmd` on the configured thread pool.
pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    let store = ResultStore::new(cfg.cache_dir.clone(), cfg.verify_cache);
    par::with_threads(cfg.threads, || run_with(cmd, cfg, &store))
}

pub fn run_with(cmd: &Command, cfg: &RunConfig, store: &ResultStore) -> Result<Outcome> {
    let mut out = match cmd {
        Command::Family => family(cfg),
        Command::Eval { d, s, deriv, oracle } => eval(cfg, *d, *s, *deriv, *oracle),
        Command::Zeros { sigma_min, out } => zeros(cfg, store, *sigma_min, out.as_deref()),
        Command::GammaMin => gamma_min_cmd(cfg, store),
        Command::Fekete { d, count_zeros, identity_s } => fekete(cfg, store, d, *count_zeros, *identity_s),
        Command::Discrepancy => discrepancy(cfg, store),
        Command::Moments => moments(cfg, store),
        Command::RdStats => rd_stats(cfg, store),
        Command::Report { input } => report(cfg, input),
        Command::Verify => verify_cmd(cfg),
    }?;
    let c = &store.counters;
    let corrupt = c.corrupt.load(std::sync::atomic::Ordering::Relaxed);
    if corrupt > 0 {
        let _ = writeln!(out.stdout, "cache: {corrupt} corrupt entries recomputed");
    }
    Ok(out)
}

fn fmt_x(x: f64) -> String {
    format!("{x:e}")
}

fn sampled(cfg: &RunConfig, x: f64) -> Result<Family> {
    let fam = enumerate_family(x)?;
    let size = cfg.sample_size.min(fam.len());
    sample_family(&fam, size, cfg.seed)
}

fn family(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    for &x in &cfg.x_list {
        let fam = enumerate_family(x)?;
        let path = cfg.out_dir.join(format!("family_x{}.csv", fmt_x(x)));
        write_atomic(&path, &cfg.provenance("family"), &fam.to_csv())?;
        let _ = writeln!(out.stdout, "x = {x}: |D(x)| = {}", fam.len());
        out.files.push(path);
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalOutput {
    d: u64,
    s: Complex64,
    l: Complex64,
    l_err: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_prime: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_prime_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_delta: Option<f64>,
}

fn eval(cfg: &RunConfig, d: u64, s: Complex64, deriv: bool, oracle: bool) -> Result<Outcome> {
    let fd = FundamentalDiscriminant::from_d(d)?;
    let e = LEngine::new(fd.clone(), cfg.engine())?;
    let v = e.l_value(s)?;
    let mut o = EvalOutput { d, s, l: v.l, l_err: v.err_est, l_prime: None, l_prime_err: None, oracle_delta: None };
    if deriv {
        if s.im == 0.0 {
            let r = e.l_prime(s.re)?;
            o.l_prime = Some(Complex64::new(r.l_prime, 0.0));
            o.l_prime_err = Some(r.l_prime_err);
        } else {
            let t = e.taylor::<2>(s)?;
            o.l_prime = Some(t.l.coeff(1));
            o.l_prime_err = Some(t.l_err[1]);
        }
    }
    if oracle {
        o.oracle_delta = Some((euler_maclaurin_oracle(&fd, s)? - v.l).norm());
    }
    Ok(Outcome { stdout: serde_json::to_string(&o)? + "\n", ..Outcome::default() })
}

#[derive(Serialize, Deserialize)]
struct XZeroRecord {
    x: f64,
    nu: f64,
    #[serde(flatten)]
    record: ZeroRecord,
}

fn zeros(cfg: &RunConfig, store: &ResultStore, sigma_min: Option<f64>, out_path: Option<&Path>) -> Result<Outcome> {
    let path = out_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join("zeros.jsonl"));
    let writer = JsonlWriter::create(&path, cfg.provenance("zeros"), 256)?;
    let sender = writer.sender();
    let mut out = Outcome::default();
    let engine_cfg = cfg.engine();
    let scan = cfg.scan();
    for &x in &cfg.x_list {
        let nu = cfg.nu.value(x);
        let sigma1 = sigma_min.unwrap_or(0.5 + nu / x.ln());
        let fam = sampled(cfg, x)?;
        let results = par::map(&fam.members, |fd| -> Result<Option<usize>> {
            let key = (fd.d, sigma1.to_bits(), engine_cfg, scan);
            let rec: std::result::Result<ZeroRecord, String> = store.load_or_compute("zeros", &key, || {
                let e = LEngine::new(fd.clone(), engine_cfg)?;
                match count_real_zeros(&e, sigma1, 1.0, scan.grid_step.min((1.0 - sigma1) / 8.0), scan.refine_tol) {
                    Ok(r) => Ok(Ok(r)),
                    Err(e) if e.is_indeterminate() => Ok(Err(e.to_string())),
                    Err(e) => Err(e),
                }
            })?;
            match rec {
                Ok(r) => {
                    let flagged = !r.is_exact();
                    sender.send(record_key(x, fd.d), &XZeroRecord { x, nu, record: r })?;
                    Ok(flagged.then_some(1))
                }
                Err(msg) => {
                    log::warn!("d = {}: {msg}", fd.d);
                    Ok(Some(1))
                }
            }
        });
        for r in results {
            if r?.is_some() {
                out.indeterminate += 1;
            }
        }
    }
    drop(sender);
    out.files.push(writer.finish()?);
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GammaRecord {
    x: f64,
    d: u64,
    gamma_min: std::result::Result<GammaMin, String>,
    hypothesis: std::result::Result<HypothesisLd, String>,
}

fn soft<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.is_indeterminate() => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

fn gamma_min_cmd(cfg: &RunConfig, store: &ResultStore) -> Result<Outcome> {
    let path = cfg.out_dir.join("gamma_min.jsonl");
    let writer = JsonlWriter::create(&path, cfg.provenance("gamma-min"), 256)?;
    let sender = writer.sender();
    let mut csv = String::from("x,d,gamma_min,hypothesis_passes\n");
    let mut out = Outcome::default();
    let engine_cfg = cfg.engine();
    for &x in &cfg.x_list {
        let nu = NuPolicy::Hyp.value(x);
        let fam = sampled(cfg, x)?;
        let recs = par::map(&fam.members, |fd| -> Result<GammaRecord> {
            let key = (fd.d, x.to_bits(), cfg.t_max.to_bits(), engine_cfg);
            let rec: GammaRecord = store.load_or_compute("gamma-min", &key, || {
                let e = LEngine::new(fd.clone(), engine_cfg)?;
                Ok(GammaRecord {
                    x,
                    d: fd.d,
                    gamma_min: soft(gamma_min(&e, cfg.t_max, None))?,
                    hypothesis: soft(hypothesis_ld_check(&e, x, nu, RangePolicy::Report))?,
                })
            })?;
            sender.send(record_key(x, fd.d), &rec)?;
            Ok(rec)
        });
        for r in recs {
            let r = r?;
            let g = r.gamma_min.as_ref().ok().and_then(GammaMin::value);
            let h = r.hypothesis.as_ref().ok().map(|h| h.passes);
            if g.is_none() || h.is_none() {
                out.indeterminate += 1;
            }
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                x,
                r.d,
                g.map_or("NA".to_string(), |v| format!("{v:.10}")),
                h.map_or("NA".to_string(), |v| v.to_string())
            );
        }
    }
    drop(sender);
    out.files.push(writer.finish()?);
    let p = cfg.out_dir.join("gamma_min.csv");
    write_atomic(&p, &cfg.provenance("gamma-min"), &csv)?;
    out.files.push(p);
    Ok(out)
}

fn fekete(cfg: &RunConfig, store: &ResultStore, ds: &[u64], count_zeros: bool, identity_s: Option<f64>) -> Result<Outcome> {
    let targets: Vec<u64> = if ds.is_empty() {
        let mut v = Vec::new();
        for &x in &cfg.x_list {
            v.extend(sampled(cfg, x)?.members.iter().map(|f| f.d));
        }
        v
    } else {
        ds.to_vec()
    };
    let mut out = Outcome::default();
    let mut csv = String::from("d,count,suspects\n");
    let mut ident = String::from("d,s,lhs1,rhs1,residual1,lhs2,rhs2,residual2\n");
    let grid = if ds.is_empty() { Some(cfg.fekete_grid) } else { None };
    if count_zeros || identity_s.is_none() {
        let rows = par::map(&targets, |&d| store.load_or_compute("fekete", &(d, grid), || fekete_real_zeros(d, grid, 1e-12)));
        for (d, r) in targets.iter().zip(rows) {
            let r = r?;
            out.indeterminate += usize::from(!r.suspects.is_empty());
            let _ = writeln!(csv, "{d},{},{}", r.count, r.suspects.len());
        }
        let p = cfg.out_dir.join("fekete.csv");
        write_atomic(&p, &cfg.provenance("fekete"), &csv)?;
        out.files.push(p);
    }
    if let Some(s) = identity_s {
        for &d in &targets {
            if d > MELLIN_MAX_D {
                return Err(Error::Domain(format!("the Mellin check is limited to d <= {MELLIN_MAX_D}, got {d}")));
            }
            let m = mellin_identity_check(d, s)?;
            let _ = writeln!(ident, "{d},{s},{},{},{:.3e},{},{},{:.3e}", m.lhs1, m.rhs1, m.residual1, m.lhs2, m.rhs2, m.residual2);
        }
        let p = cfg.out_dir.join("fekete_mellin.csv");
        write_atomic(&p, &cfg.provenance("fekete"), &ident)?;
        out.files.push(p);
    }
    Ok(out)
}

fn discrepancy(cfg: &RunConfig, store: &ResultStore) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mc: Vec<f64> = store.load_or_compute("mc", &(cfg.z.to_bits(), cfg.mc_samples, cfg.seed, DEFAULT_TAIL_TOLERANCE.to_bits()), || {
        mc_distribution(cfg.z, cfg.mc_samples, cfg.seed)
    })?;
    let mut csv = String::from("x,z,V_z,sample,excluded,mean,std_err,D,theory_bound,ratio\n");
    let mut dat = String::from("# x  D_over_bound\n");
    let engine_cfg = cfg.engine();
    for &x in &cfg.x_list {
        let fam = sampled(cfg, x)?;
        let ds: Vec<u64> = fam.members.iter().map(|f| f.d).collect();
        let key = (x.to_bits(), cfg.z.to_bits(), DISTRIBUTION_C.to_bits(), cfg.nu, engine_cfg, &ds);
        let dist: EmpiricalDistribution = store.load_or_compute("distribution", &key, || empirical_distribution(&fam, cfg.z, DISTRIBUTION_C, cfg.nu, &engine_cfg))?;
        let rep = discrepancy_of(&dist, &mc)?;
        out.indeterminate += rep.excluded;
        let _ = writeln!(
            csv,
            "{x},{},{},{},{},{},{},{},{},{}",
            cfg.z,
            rep.v_z,
            dist.entries.len(),
            rep.excluded,
            dist.mean(),
            dist.std_err(),
            rep.d,
            rep.theory_bound,
            rep.ratio
        );
        let _ = writeln!(dat, "{x} {}", rep.ratio);
        let mut ecdf = String::from("# value  family_cdf\n");
        let n = dist.sorted.len() as f64;
        for (i, v) in dist.sorted.iter().enumerate() {
            let _ = writeln!(ecdf, "{v} {}", (i + 1) as f64 / n);
        }
        let p = cfg.out_dir.join(format!("distribution_x{}.dat", fmt_x(x)));
        write_atomic(&p, &cfg.provenance("discrepancy"), &ecdf)?;
        out.files.push(p);
    }
    for (name, body) in [("discrepancy.csv", csv), ("discrepancy.dat", dat)] {
        let p = cfg.out_dir.join(name);
        write_atomic(&p, &cfg.provenance("discrepancy"), &body)?;
        out.files.push(p);
    }
    Ok(out)
}

fn moments(cfg: &RunConfig, store: &ResultStore) -> Result<Outcome> {
    let mut out = Outcome::default();
    let y = cfg.moment_y;
    let b: BTreeMap<u64, f64> = primes_up_to(y).into_iter().map(|p| (p, 1.0)).collect();
    let mut csv = String::from("x,Y,k,moment_lhs,moment_rand,difference,in_range\n");
    let mut sieve = String::from("x,y_lo,z_hi,k,log_lhs,log_rhs,ratio_explicit,ratio,in_range\n");
    let mut central = String::from("x,nu,k,s,moment,mean_re,mean_im,ratio_nu4,ratio_nu8,restricted,excluded,in_range\n");
    let mut dat = String::from("# x  central_ratio_nu4\n");
    let engine_cfg = cfg.engine();
    for &x in &cfg.x_list {
        let fam = enumerate_family(x)?;
        for k in 1..=cfg.moment_k {
            let lhs = moment_lhs(&fam, &b, y, k, RangePolicy::Report)?;
            let rand = moment_rand(&prime_indicator(y), y, k, MomentBudget::default())?.to_f64().unwrap_or(f64::NAN);
            let _ = writeln!(csv, "{x},{y},{k},{},{rand},{},{}", lhs.value, lhs.value - rand, lhs.in_range);
        }
        for k in 1..=2 {
            let r = large_sieve_check(&fam, &|_| Complex64::new(1.0, 0.0), 10.0, 40.0, k, RangePolicy::Report)?;
            let _ = writeln!(sieve, "{x},10,40,{k},{},{},{},{},{}", r.log_lhs, r.log_rhs, r.ratio_explicit, r.ratio, r.in_range);
        }
        let sample = sampled(cfg, x)?;
        let nu = cfg.nu.value(x);
        let ds: Vec<u64> = sample.members.iter().map(|f| f.d).collect();
        let key = (x.to_bits(), nu.to_bits(), engine_cfg, &ds);
        let r = store.load_or_compute("central", &key, || central_moments(&sample, nu, 1, None, RangePolicy::Report, &engine_cfg))?;
        out.indeterminate += r.excluded.len();
        let _ = writeln!(
            central,
            "{x},{nu},1,{},{},{},{},{},{},{},{},{}",
            r.s.re,
            r.moment,
            r.mean.re,
            r.mean.im,
            r.ratio_nu4,
            r.ratio_nu8,
            r.restricted.len(),
            r.excluded.len(),
            r.in_range
        );
        let _ = writeln!(dat, "{x} {}", r.ratio_nu4);
    }
    for (name, body) in [("moments.csv", csv), ("large_sieve.csv", sieve), ("central_moments.csv", central), ("central_moments.dat", dat)] {
        let p = cfg.out_dir.join(name);
        write_atomic(&p, &cfg.provenance("moments"), &body)?;
        out.files.push(p);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct XRdRecord {
    x: f64,
    nu: f64,
    #[serde(flatten)]
    record: RdRecord,
}

fn rd_stats(cfg: &RunConfig, store: &ResultStore) -> Result<Outcome> {
    let engine_cfg = cfg.engine();
    let scan = cfg.scan();
    let near = cfg.near_split;
    let stats = rd_statistics_with(&cfg.x_list, cfg.nu, cfg.sample_size, cfg.seed, &|fd, x, nu| {
        store.load_or_compute("rd", &(fd.d, x.to_bits(), nu.to_bits(), scan, near, engine_cfg), || rd_record(fd, x, nu, &scan, near, &engine_cfg))
    })?;
    let mut out = Outcome::default();
    let mut csv = String::from("x,nu,sigma1,sample,certified,suspects,mean,std_err,max,loglog,envelope,mean_over_loglog,mean_over_envelope,near_sum,away_sum_passing\n");
    let mut hist = String::from("x,count,frequency\n");
    let mut dat = String::from("# x  mean_Rd  loglog_x\n");
    let path = cfg.out_dir.join("rd_records.jsonl");
    let writer = JsonlWriter::create(&path, cfg.provenance("rd-stats"), 256)?;
    let sender = writer.sender();
    let opt = |v: Option<u64>| v.map_or("NA".to_string(), |v| v.to_string());
    for s in &stats.per_x {
        out.indeterminate += s.suspects;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.x,
            s.nu,
            s.sigma1,
            s.records.len(),
            s.certified,
            s.suspects,
            s.mean,
            s.std_err,
            s.max,
            s.loglog,
            s.loglog_logloglog,
            s.mean_over_loglog,
            s.mean_over_envelope,
            opt(s.near_sum),
            opt(s.away_sum_passing)
        );
        for (c, f) in s.histogram.iter().enumerate() {
            let _ = writeln!(hist, "{},{c},{f}", s.x);
        }
        let _ = writeln!(dat, "{} {} {}", s.x, s.mean, s.loglog);
        for r in &s.records {
            sender.send(record_key(s.x, r.d), &XRdRecord { x: s.x, nu: s.nu, record: r.clone() })?;
        }
    }
    drop(sender);
    out.files.push(writer.finish()?);
    for (name, body) in [("rd_stats.csv", csv), ("rd_histogram.csv", hist), ("rd_mean.dat", dat)] {
        let p = cfg.out_dir.join(name);
        write_atomic(&p, &cfg.provenance("rd-stats"), &body)?;
        out.files.push(p);
    }
    Ok(out)
}

/// Count and exactness of one JSONL line from `zeros` or `rd-stats`.
fn line_count(v: &serde_json::Value) -> Option<(f64, u64, bool)> {
    let x = v.get("x")?.as_f64()?;
    if let Some(c) = v.get("count").and_then(|c| c.as_u64()) {
        let exact = v.get("suspects").and_then(|s| s.as_array()).is_some_and(|s| s.is_empty());
        return Some((x, c, exact));
    }
    let away = v.get("away")?;
    let c = away.get("count")?.as_u64()?;
    let exact = v.get("flag").is_some_and(|f| f.is_null()) && away.get("suspects").and_then(|s| s.as_array()).is_some_and(|s| s.is_empty());
    Some((x, c, exact))
}

fn report(cfg: &RunConfig, input: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::Usage(format!("cannot read {}: {e}", input.display())))?;
    let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    let mut skipped = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Usage(format!("line {}: {e}", i + 1)))?;
        match line_count(&v) {
            Some((x, c, true)) => groups.entry(x.to_bits()).or_insert((x, Vec::new())).1.push(c as f64),
            Some((_, _, false)) => skipped += 1,
            None => return Err(Error::Usage(format!("line {}: not a zero-count record", i + 1))),
        }
    }
    let mut dat = String::from("# x  mean_Rd  loglog_x\n");
    for (x, counts) in groups.values() {
        let _ = writeln!(dat, "{x} {} {}", crate::stats::pairwise_sum(counts) / counts.len() as f64, x.ln().ln());
    }
    let p = cfg.out_dir.join("report.dat");
    write_atomic(&p, &cfg.provenance("report"), &dat)?;
    Ok(Outcome { files: vec![p], stdout: dat, indeterminate: skipped, failed: 0 })
}

fn verify_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let checks = verify::run_checks();
    let mut out = Outcome::default();
    let mut body = String::from("check,pass,detail\n");
    for c in &checks {
        let _ = writeln!(out.stdout, "[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        let _ = writeln!(body, "{},{},\"{}\"", c.name, c.pass, c.detail.replace('"', "'"));
        out.failed += usize::from(!c.pass);
    }
    let p = cfg.out_dir.join("verify.csv");
    write_atomic(&p, &cfg.provenance("verify"), &body)?;
    out.files.push(p);
    Ok(out)
}
