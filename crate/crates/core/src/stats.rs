// SPDX-License-Identifier: Apache-2.0

//! Family-level experiments over `D(x)`: moments of character sums against
//! the random model, large-sieve moment bounds, the value distribution of
//! `-L'/L(z)` and its discrepancy from the random model, moments near the
//! central point, and counts of real zeros of `L'`.
//!
//! Per-`d` work goes through [`par::map`]; every reduction is a fixed-order
//! pairwise sum over the results in family order.

use crate::characters::{Family, FundamentalDiscriminant};
use crate::error::{Error, RangePolicy, Result};
use crate::lfunc::{EngineConfig, LEngine};
use crate::par;
use crate::primes;
use crate::randmodel::{v_norm, RandSeriesSampler, DEFAULT_TAIL_TOLERANCE};
use crate::selberg::{sigma_y_d, DEFAULT_HEIGHT_CAP};
use crate::zeros::{count_real_zeros, hypothesis_ld_check, NuPolicy, RealScan, ZeroRecord};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Pairwise sum in a fixed association order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `log sum exp` of `v`; `-inf` entries contribute nothing.
fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    let shifted: Vec<f64> = v.iter().map(|&l| (l - m).exp()).collect();
    m + pairwise_sum(&shifted).ln()
}

/// Seeded subsample of `size` members, kept in family order. The RNG stream
/// is derived from `x`, so different `x` under one seed draw independently.
pub fn sample_family(family: &Family, size: usize, seed: u64) -> Result<Family> {
    if size > family.len() {
        return Err(Error::Domain(format!("sample size {size} exceeds |D(x)| = {}", family.len())));
    }
    if size == family.len() {
        return Ok(family.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(family.x.to_bits());
    let mut idx = rand::seq::index::sample(&mut rng, family.len(), size).into_vec();
    idx.sort_unstable();
    Ok(Family { x: family.x, members: idx.into_iter().map(|i| family.members[i].clone()).collect() })
}

// ---------------------------------------------------------------------------
// Moments of character sums

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentLhs {
    pub x: f64,
    pub y: u64,
    pub k: u32,
    pub value: f64,
    /// `k <= log x / log Y`.
    pub in_range: bool,
}

/// `(1/|D(x)|) sum_d (sum_{n <= Y} b(n) chi_d(n))^k`, computed directly.
pub fn moment_lhs(family: &Family, b: &BTreeMap<u64, f64>, y: u64, k: u32, policy: RangePolicy) -> Result<MomentLhs> {
    if family.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    if y < 2 || y as f64 > family.x || k == 0 {
        return Err(Error::Domain(format!("need 2 <= Y <= x and k >= 1, got Y = {y}, k = {k}")));
    }
    let cap = family.x.ln() / (y as f64).ln();
    let in_range = k as f64 <= cap * (1.0 + 1e-12);
    if !in_range && policy == RangePolicy::Enforce {
        return Err(Error::Domain(format!("k = {k} exceeds log x / log Y = {cap:.4}")));
    }
    let coeffs: Vec<(u64, f64)> = b.range(1..=y).map(|(&n, &c)| (n, c)).filter(|&(_, c)| c != 0.0).collect();
    let powers = par::map(&family.members, |fd| {
        let s: f64 = coeffs.iter().map(|&(n, c)| c * fd.chi(n) as f64).sum();
        s.powi(k as i32)
    });
    Ok(MomentLhs { x: family.x, y, k, value: pairwise_sum(&powers) / family.len() as f64, in_range })
}

// ---------------------------------------------------------------------------
// Large-sieve moments

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeSieveReport {
    pub x: f64,
    pub y_lo: f64,
    pub z_hi: f64,
    pub k: u32,
    /// `k <= log x / (10 log z)`.
    pub in_range: bool,
    pub log_lhs: f64,
    /// `log` of the three envelope terms, with `c_0 = 1`.
    pub log_prime_term: f64,
    pub log_square_term: f64,
    pub log_tail_term: f64,
    pub log_rhs: f64,
    /// LHS over the sum of the two explicit-constant terms.
    pub ratio_explicit: f64,
    /// LHS over the full envelope.
    pub ratio: f64,
}

impl LargeSieveReport {
    pub fn lhs(&self) -> f64 {
        self.log_lhs.exp()
    }
}

/// Moment `(1/|D(x)|) sum_d |sum_{y <= n <= z} a(n) Lambda(n) chi_d(n)/sqrt n|^{2k}`
/// against its large-sieve envelope. Everything is accumulated in logs.
pub fn large_sieve_check(
    family: &Family,
    a: &(dyn Fn(u64) -> Complex64 + Sync),
    y_lo: f64,
    z_hi: f64,
    k: u32,
    policy: RangePolicy,
) -> Result<LargeSieveReport> {
    if family.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    if !(10.0 <= y_lo && y_lo <= z_hi && z_hi.is_finite()) || k == 0 {
        return Err(Error::Domain(format!("need 10 <= y <= z and k >= 1, got y = {y_lo}, z = {z_hi}, k = {k}")));
    }
    let cap = family.x.ln() / (10.0 * z_hi.ln());
    let in_range = k as f64 <= cap * (1.0 + 1e-12);
    if !in_range && policy == RangePolicy::Enforce {
        return Err(Error::Domain(format!("k = {k} exceeds log x / (10 log z) = {cap:.4}")));
    }
    let pp = primes::PrimePowers::new(z_hi.floor() as u64);
    let mut terms = Vec::new();
    for &(n, log_p) in &pp.entries {
        if (n as f64) < y_lo {
            continue;
        }
        let c = a(n);
        if c.norm() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("|a({n})| = {} exceeds 1", c.norm())));
        }
        terms.push((n, c * (log_p / (n as f64).sqrt())));
    }
    let two_k = 2.0 * k as f64;
    let logs = par::map(&family.members, |fd| {
        let s: Complex64 = terms.iter().map(|&(n, c)| c * fd.chi(n) as f64).sum();
        two_k * s.norm().ln()
    });
    let log_lhs = log_sum_exp(&logs) - (family.len() as f64).ln();

    let mut prime_sum = Vec::new();
    let mut square_sum = Vec::new();
    for p in primes::primes_up_to(z_hi.floor() as u64) {
        let pf = p as f64;
        let lp = pf.ln();
        if pf >= y_lo {
            prime_sum.push(a(p).norm_sqr() * lp * lp / pf);
        }
        if pf * pf >= y_lo && pf * pf <= z_hi {
            square_sum.push(a(p * p).norm() * lp / pf);
        }
    }
    let kf = k as f64;
    let log_prime_term = kf * (20.0 * kf * pairwise_sum(&prime_sum)).ln();
    let log_square_term = two_k * (3.0 * pairwise_sum(&square_sum)).ln();
    let log_tail_term = -kf * y_lo.ln() / 3.0;
    let log_explicit = log_sum_exp(&[log_prime_term, log_square_term]);
    let log_rhs = log_sum_exp(&[log_prime_term, log_square_term, log_tail_term]);
    Ok(LargeSieveReport {
        x: family.x,
        y_lo,
        z_hi,
        k,
        in_range,
        log_lhs,
        log_prime_term,
        log_square_term,
        log_tail_term,
        log_rhs,
        ratio_explicit: (log_lhs - log_explicit).exp(),
        ratio: (log_lhs - log_rhs).exp(),
    })
}

// ---------------------------------------------------------------------------
// Value distribution of -L'/L(z)

/// Default constant `c` in `y = exp(c V_z log(log x / V_z))` for the
/// distribution experiments.
pub const DISTRIBUTION_C: f64 = 20.0;

/// `exp(c V log(log x / V))`, returned as `log y`.
pub fn log_y_for(x: f64, v: f64, c: f64) -> Result<f64> {
    let r = x.ln() / v;
    if !(r > 1.0) {
        return Err(Error::Domain(format!("need log x > V_z, got log x = {}, V_z = {v}", x.ln())));
    }
    Ok(c * v * r.ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistEntry {
    pub d: u64,
    /// `-L'/L(z, chi_d) / V_z` for members of `D_z(x)`.
    pub value: Option<f64>,
    pub member: bool,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub x: f64,
    pub z: f64,
    pub v_z: f64,
    pub c: f64,
    pub log_y: f64,
    /// One entry per family member, in family order.
    pub entries: Vec<DistEntry>,
    /// Member values, ascending.
    pub sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn excluded(&self) -> impl Iterator<Item = &DistEntry> {
        self.entries.iter().filter(|e| !e.member)
    }

    pub fn excluded_fraction(&self) -> f64 {
        self.excluded().count() as f64 / self.entries.len().max(1) as f64
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.sorted) / self.sorted.len() as f64
    }

    pub fn std_err(&self) -> f64 {
        std_err(&self.sorted)
    }
}

fn std_err(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let m = pairwise_sum(v) / n;
    let sq: Vec<f64> = v.iter().map(|&t| (t - m) * (t - m)).collect();
    (pairwise_sum(&sq) / (n - 1.0) / n).sqrt()
}

fn dist_entry(fd: &FundamentalDiscriminant, z: f64, v: f64, log_y: f64, cfg: &EngineConfig) -> Result<DistEntry> {
    let excluded = |reason: String| Ok(DistEntry { d: fd.d, value: None, member: false, reason: Some(reason) });
    let engine = LEngine::new(fd.clone(), *cfg)?;
    let sigma = match sigma_y_d(&engine, log_y.exp(), 0.0, DEFAULT_HEIGHT_CAP) {
        Ok(s) => s,
        Err(e) if e.is_indeterminate() => return excluded(format!("sigma_(y,d) indeterminate: {e}")),
        Err(e) => return Err(e),
    };
    if !sigma.attained_by_default {
        return excluded(format!("sigma_(y,d) = {} from zeros {:?}", sigma.value, sigma.zeros));
    }
    match engine.log_deriv(Complex64::new(z, 0.0)) {
        Ok(ld) => Ok(DistEntry { d: fd.d, value: Some(ld.value.re / v), member: true, reason: None }),
        Err(e) if e.is_indeterminate() => excluded(format!("-L'/L indeterminate: {e}")),
        Err(e) => Err(e),
    }
}

/// Values of `-L'/L(z, chi_d)/V_z` over `D_z(x)`, the members whose Selberg
/// abscissa for `y = exp(c V_z log(log x/V_z))` takes its default value.
/// `y` enters only through `log y`.
pub fn empirical_distribution(family: &Family, z: f64, c: f64, nu: NuPolicy, cfg: &EngineConfig) -> Result<EmpiricalDistribution> {
    let lx = family.x.ln();
    let lo = 0.5 + nu.value(family.x) / lx;
    if !(lo <= z && z <= 1.0) {
        return Err(Error::Domain(format!("need 1/2 + nu/log x = {lo:.4} <= z <= 1, got z = {z}")));
    }
    let v = v_norm(z);
    let log_y = log_y_for(family.x, v, c)?;
    let entries = par::map(&family.members, |fd| dist_entry(fd, z, v, log_y, cfg)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<f64> = entries.iter().filter_map(|e| e.value).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(EmpiricalDistribution { x: family.x, z, v_z: v, c, log_y, entries, sorted })
}

/// `n` sorted draws of `L_rand(z)/V_z`.
pub fn mc_distribution(z: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = RandSeriesSampler::with_tolerance(z, DEFAULT_TAIL_TOLERANCE)?;
    let v = v_norm(z);
    let mut draws: Vec<f64> = sampler.draws(seed, n).into_iter().map(|t| t / v).collect();
    draws.sort_by(f64::total_cmp);
    Ok(draws)
}

/// Exact `sup_t |F_a(t) - F_b(t)|` for two ascending samples, evaluated at
/// every jump point with ties consumed together.
pub fn two_sample_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&w)) => u.min(w),
            (Some(&u), None) => u,
            (None, Some(&w)) => w,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// `sqrt(V log(log x / V) / log x)`.
pub fn theory_bound(x: f64, v: f64) -> f64 {
    let lx = x.ln();
    (v * (lx / v).ln() / lx).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub x: f64,
    pub z: f64,
    pub v_z: f64,
    pub family_values: Vec<f64>,
    pub mc_values: Vec<f64>,
    pub excluded: usize,
    pub d: f64,
    pub theory_bound: f64,
    pub ratio: f64,
}

pub const MIN_MC_SAMPLES: usize = 10_000;

/// Discrepancy between a family distribution and sorted Monte Carlo draws.
pub fn discrepancy_of(dist: &EmpiricalDistribution, mc_sorted: &[f64]) -> Result<DiscrepancyReport> {
    if dist.sorted.is_empty() {
        return Err(Error::Domain(format!("no members of D_z(x) left at x = {}", dist.x)));
    }
    if mc_sorted.len() < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_MC_SAMPLES} Monte Carlo draws, got {}", mc_sorted.len())));
    }
    let d = two_sample_distance(&dist.sorted, mc_sorted);
    let tb = theory_bound(dist.x, dist.v_z);
    Ok(DiscrepancyReport {
        x: dist.x,
        z: dist.z,
        v_z: dist.v_z,
        family_values: dist.sorted.clone(),
        mc_values: mc_sorted.to_vec(),
        excluded: dist.excluded().count(),
        d,
        theory_bound: tb,
        ratio: d / tb,
    })
}

/// `D(z)` for `family` against `mc_samples` draws of the random model.
pub fn discrepancy(family: &Family, z: f64, mc_samples: usize, seed: u64, nu: NuPolicy, cfg: &EngineConfig) -> Result<DiscrepancyReport> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_MC_SAMPLES} Monte Carlo draws, got {mc_samples}")));
    }
    let dist = empirical_distribution(family, z, DISTRIBUTION_C, nu, cfg)?;
    let mc = mc_distribution(z, mc_samples, seed)?;
    discrepancy_of(&dist, &mc)
}

// ---------------------------------------------------------------------------
// Moments near the central point

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralMomentReport {
    pub x: f64,
    pub nu: f64,
    pub k: u32,
    pub s: Complex64,
    /// `k <= nu/20`.
    pub in_range: bool,
    pub log_y: f64,
    pub family_size: usize,
    /// Members passing both the zero-free disc and the default Selberg abscissa.
    pub restricted: Vec<u64>,
    pub excluded: Vec<(u64, String)>,
    /// `(1/|D(x)|) sum_restricted |L_d(s)|^{2k}`.
    pub moment: f64,
    /// `(1/|D(x)|) sum_restricted L_d(s)`.
    pub mean: Complex64,
    /// Moment over `nu^{4k} (k (log x)^2)^k`.
    pub ratio_nu4: f64,
    /// Moment over `nu^{8k} (k (log x)^2)^k`.
    pub ratio_nu8: f64,
}

/// `s_0 = 1/2 + nu/log x` and `r_0 = nu/log x + 1/(2 nu^3 log x)`.
pub fn central_disc(x: f64, nu: f64) -> (f64, f64) {
    let lx = x.ln();
    (0.5 + nu / lx, nu / lx + 1.0 / (2.0 * nu.powi(3) * lx))
}

enum CentralOutcome {
    In(Complex64),
    Out(String),
}

fn central_value(fd: &FundamentalDiscriminant, x: f64, nu: f64, log_y: f64, s: Complex64, cfg: &EngineConfig) -> Result<CentralOutcome> {
    let engine = LEngine::new(fd.clone(), *cfg)?;
    let out = |r: String| Ok(CentralOutcome::Out(r));
    match hypothesis_ld_check(&engine, x, nu, RangePolicy::Report) {
        Ok(h) if !h.passes => return out(format!("zero-free disc fails, zeros {:?}", h.witnesses)),
        Ok(_) => {}
        Err(e) if e.is_indeterminate() => return out(format!("disc check indeterminate: {e}")),
        Err(e) => return Err(e),
    }
    match sigma_y_d(&engine, log_y.exp(), s.im, DEFAULT_HEIGHT_CAP) {
        Ok(sg) if !sg.attained_by_default => return out(format!("sigma_(y,d) = {}", sg.value)),
        Ok(_) => {}
        Err(e) if e.is_indeterminate() => return out(format!("sigma_(y,d) indeterminate: {e}")),
        Err(e) => return Err(e),
    }
    match engine.log_deriv(s) {
        Ok(ld) => Ok(CentralOutcome::In(ld.value)),
        Err(e) if e.is_indeterminate() => out(format!("-L'/L indeterminate: {e}")),
        Err(e) => Err(e),
    }
}

/// Moment of `|L_d(s)|^{2k}` over the members with a zero-free disc and the
/// default Selberg abscissa for `y = x^{4/nu}`. `s = None` means `s_0`.
pub fn central_moments(
    family: &Family,
    nu: f64,
    k: u32,
    s: Option<Complex64>,
    policy: RangePolicy,
    cfg: &EngineConfig,
) -> Result<CentralMomentReport> {
    if family.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    let x = family.x;
    if !(nu > 0.0) || k == 0 {
        return Err(Error::Domain(format!("need nu > 0 and k >= 1, got nu = {nu}, k = {k}")));
    }
    let in_range = k as f64 <= nu / 20.0;
    if !in_range && policy == RangePolicy::Enforce {
        return Err(Error::Domain(format!("k = {k} exceeds nu/20 = {:.4}", nu / 20.0)));
    }
    let (s0, r0) = central_disc(x, nu);
    let s = s.unwrap_or(Complex64::new(s0, 0.0));
    if (s - s0).norm() > r0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("|s - s_0| = {} exceeds r_0 = {r0}", (s - s0).norm())));
    }
    let log_y = 4.0 * x.ln() / nu;
    let outcomes = par::map(&family.members, |fd| central_value(fd, x, nu, log_y, s, cfg)).into_iter().collect::<Result<Vec<_>>>()?;
    let mut restricted = Vec::new();
    let mut excluded = Vec::new();
    let mut powers = Vec::new();
    let mut re = Vec::new();
    let mut im = Vec::new();
    for (fd, o) in family.members.iter().zip(outcomes) {
        match o {
            CentralOutcome::In(v) => {
                restricted.push(fd.d);
                powers.push(v.norm_sqr().powi(k as i32));
                re.push(v.re);
                im.push(v.im);
            }
            CentralOutcome::Out(r) => excluded.push((fd.d, r)),
        }
    }
    if restricted.is_empty() {
        return Err(Error::Domain(format!("no member of the family at x = {x} passes the restrictions")));
    }
    let n = family.len() as f64;
    let moment = pairwise_sum(&powers) / n;
    let kf = k as f64;
    let base = (kf * x.ln().powi(2)).powf(kf);
    Ok(CentralMomentReport {
        x,
        nu,
        k,
        s,
        in_range,
        log_y,
        family_size: family.len(),
        restricted,
        excluded,
        moment,
        mean: Complex64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n),
        ratio_nu4: moment / (nu.powf(4.0 * kf) * base),
        ratio_nu8: moment / (nu.powf(8.0 * kf) * base),
    })
}

// ---------------------------------------------------------------------------
// Real zeros of L'

/// Per-`d` outcome of the zero counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdRecord {
    pub d: u64,
    /// Count on `[1/2 + nu/log x, 1]`.
    pub away: Option<ZeroRecord>,
    /// Whether the zero-free disc holds; `None` when not requested.
    pub hypothesis: Option<bool>,
    /// Count on `[1/2, 1/2 + nu/log x]`, for members passing the disc check.
    pub near: Option<ZeroRecord>,
    /// Why the record is incomplete.
    pub flag: Option<String>,
}

impl RdRecord {
    /// Counted with no suspects and no flag.
    pub fn certified(&self) -> bool {
        self.flag.is_none() && self.away.as_ref().is_some_and(|r| r.is_exact()) && self.near.as_ref().is_none_or(|r| r.is_exact())
    }
}

fn scan_step(scan: &RealScan, lo: f64, hi: f64) -> f64 {
    scan.grid_step.min((hi - lo) / 8.0)
}

/// Zero counts for one discriminant.
pub fn rd_record(fd: &FundamentalDiscriminant, x: f64, nu: f64, scan: &RealScan, near_split: bool, cfg: &EngineConfig) -> Result<RdRecord> {
    let engine = LEngine::new(fd.clone(), *cfg)?;
    let sigma1 = 0.5 + nu / x.ln();
    let mut rec = RdRecord { d: fd.d, away: None, hypothesis: None, near: None, flag: None };
    match count_real_zeros(&engine, sigma1, 1.0, scan_step(scan, sigma1, 1.0), scan.refine_tol) {
        Ok(r) => rec.away = Some(r),
        Err(e) if e.is_indeterminate() => {
            rec.flag = Some(format!("count on [sigma1, 1] indeterminate: {e}"));
            return Ok(rec);
        }
        Err(e) => return Err(e),
    }
    if near_split {
        match hypothesis_ld_check(&engine, x, nu, RangePolicy::Report) {
            Ok(h) => rec.hypothesis = Some(h.passes),
            Err(e) if e.is_indeterminate() => {
                rec.flag = Some(format!("disc check indeterminate: {e}"));
                return Ok(rec);
            }
            Err(e) => return Err(e),
        }
        if rec.hypothesis == Some(true) {
            match count_real_zeros(&engine, 0.5, sigma1, scan_step(scan, 0.5, sigma1), scan.refine_tol) {
                Ok(r) => rec.near = Some(r),
                Err(e) if e.is_indeterminate() => rec.flag = Some(format!("count on [1/2, sigma1] indeterminate: {e}")),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdSummary {
    pub x: f64,
    pub nu: f64,
    pub sigma1: f64,
    pub records: Vec<RdRecord>,
    /// Statistics over certified records.
    pub certified: usize,
    pub mean: f64,
    pub std_err: f64,
    pub max: u32,
    /// `histogram[c]` = number of certified records with count `c`.
    pub histogram: Vec<u32>,
    /// Records that are not certified.
    pub suspects: usize,
    pub loglog: f64,
    pub loglog_logloglog: f64,
    pub mean_over_loglog: f64,
    pub mean_over_envelope: f64,
    /// Sums of the near and away counts over certified members passing the disc check.
    pub near_sum: Option<u64>,
    pub away_sum_passing: Option<u64>,
}

impl RdSummary {
    pub fn from_records(x: f64, nu: f64, records: Vec<RdRecord>) -> Self {
        let counts: Vec<f64> = records.iter().filter(|r| r.certified()).map(|r| r.away.as_ref().map_or(0, |a| a.count) as f64).collect();
        let n = counts.len();
        let max = counts.iter().fold(0.0f64, |m, &c| m.max(c)) as u32;
        let mut histogram = vec![0u32; max as usize + 1];
        for &c in &counts {
            histogram[c as usize] += 1;
        }
        let mean = if n == 0 { f64::NAN } else { pairwise_sum(&counts) / n as f64 };
        let ll = x.ln().ln();
        let env = ll * ll.ln();
        let split = records.iter().any(|r| r.hypothesis.is_some());
        let passing = || records.iter().filter(|r| r.certified() && r.hypothesis == Some(true));
        let near_sum = split.then(|| passing().map(|r| r.near.as_ref().map_or(0, |a| a.count as u64)).sum());
        let away_sum_passing = split.then(|| passing().map(|r| r.away.as_ref().map_or(0, |a| a.count as u64)).sum());
        RdSummary {
            x,
            nu,
            sigma1: 0.5 + nu / x.ln(),
            suspects: records.len() - n,
            records,
            certified: n,
            mean,
            std_err: std_err(&counts),
            max,
            histogram,
            loglog: ll,
            loglog_logloglog: env,
            mean_over_loglog: mean / ll,
            mean_over_envelope: mean / env,
            near_sum,
            away_sum_passing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdStatistics {
    pub nu_policy: NuPolicy,
    pub sample_size: usize,
    pub seed: u64,
    pub per_x: Vec<RdSummary>,
}

/// Sampled counts of real zeros of `L'` on `[1/2 + nu/log x, 1]` for each `x`.
/// `producer` computes one record; pass [`rd_record`] or a caching wrapper.
pub fn rd_statistics_with(
    x_list: &[f64],
    nu_policy: NuPolicy,
    sample_size: usize,
    seed: u64,
    producer: &(dyn Fn(&FundamentalDiscriminant, f64, f64) -> Result<RdRecord> + Sync),
) -> Result<RdStatistics> {
    let mut per_x = Vec::with_capacity(x_list.len());
    for &x in x_list {
        if !(x >= 1e3) {
            return Err(Error::Domain(format!("R_d statistics need x >= 1000, got {x}")));
        }
        let nu = nu_policy.value(x);
        let sigma1 = 0.5 + nu / x.ln();
        if !(sigma1 < 1.0) {
            return Err(Error::Domain(format!("1/2 + nu/log x = {sigma1} is not below 1")));
        }
        let family = sample_family(&crate::characters::enumerate_family(x)?, sample_size, seed)?;
        let records = par::map(&family.members, |fd| producer(fd, x, nu)).into_iter().collect::<Result<Vec<_>>>()?;
        per_x.push(RdSummary::from_records(x, nu, records));
    }
    Ok(RdStatistics { nu_policy, sample_size, seed, per_x })
}

pub fn rd_statistics(
    x_list: &[f64],
    nu_policy: NuPolicy,
    sample_size: usize,
    seed: u64,
    scan: RealScan,
    near_split: bool,
    cfg: &EngineConfig,
) -> Result<RdStatistics> {
    rd_statistics_with(x_list, nu_policy, sample_size, seed, &|fd, x, nu| rd_record(fd, x, nu, &scan, near_split, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::{char_average, enumerate_family};
    use crate::randmodel::{expect_x, moment_rand, prime_indicator, MomentBudget};
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    #[test]
    fn zero_coefficients_give_zero_moment() {
        let fam = enumerate_family(2000.0).unwrap();
        let m = moment_lhs(&fam, &BTreeMap::new(), 10, 2, RangePolicy::Enforce).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn single_prime_second_moment() {
        let fam = enumerate_family(2000.0).unwrap();
        let b = BTreeMap::from([(3u64, 1.0)]);
        let m = moment_lhs(&fam, &b, 3, 2, RangePolicy::Enforce).unwrap();
        assert!((m.value - 0.75).abs() < 0.1, "{}", m.value);
    }

    #[test]
    fn moment_range_is_enforced() {
        let fam = enumerate_family(2000.0).unwrap();
        let b = BTreeMap::from([(3u64, 1.0)]);
        assert!(moment_lhs(&fam, &b, 10, 4, RangePolicy::Enforce).is_err());
        assert!(!moment_lhs(&fam, &b, 10, 4, RangePolicy::Report).unwrap().in_range);
    }

    #[test]
    fn first_moment_is_linear_in_char_averages() {
        let fam = enumerate_family(2000.0).unwrap();
        let b: BTreeMap<u64, f64> = (1..=40u64).map(|n| (n, ((n * 7) % 5) as f64 - 2.0)).collect();
        let m = moment_lhs(&fam, &b, 40, 1, RangePolicy::Enforce).unwrap();
        let direct: f64 = b.iter().map(|(&n, &c)| c * char_average(&fam, n).unwrap()).sum();
        assert!((m.value - direct).abs() < 1e-12, "{} vs {direct}", m.value);
    }

    #[test]
    fn squares_match_orthogonality() {
        let fam = enumerate_family(1e4).unwrap();
        let b: BTreeMap<u64, f64> = (1..=9u64).map(|n| (n * n, 1.0)).collect();
        let m = moment_lhs(&fam, &b, 81, 1, RangePolicy::Enforce).unwrap();
        let expected: f64 = (1..=9u64).map(|n| expect_x(n * n).unwrap().to_f64().unwrap()).sum();
        // nine terms, each within x^{-1/5}
        assert!((m.value - expected).abs() < 9.0 * 1e4f64.powf(-0.2), "{} vs {expected}", m.value);
    }

    #[test]
    fn prime_moments_track_random_model() {
        let fam = enumerate_family(2000.0).unwrap();
        let b: BTreeMap<u64, f64> = primes::primes_up_to(10).into_iter().map(|p| (p, 1.0)).collect();
        for k in 1..=3 {
            let lhs = moment_lhs(&fam, &b, 10, k, RangePolicy::Enforce).unwrap().value;
            let rhs = moment_rand(&prime_indicator(10), 10, k, MomentBudget::default()).unwrap().to_f64().unwrap();
            assert!((lhs - rhs).abs() < 0.1, "k = {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn large_sieve_zero_sequence() {
        let fam = enumerate_family(2000.0).unwrap();
        let r = large_sieve_check(&fam, &|_| Complex64::new(0.0, 0.0), 10.0, 40.0, 1, RangePolicy::Report).unwrap();
        assert_eq!(r.log_lhs, f64::NEG_INFINITY);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn large_sieve_rejects_large_coefficients() {
        let fam = enumerate_family(2000.0).unwrap();
        let e = large_sieve_check(&fam, &|_| Complex64::new(1.5, 0.0), 10.0, 40.0, 1, RangePolicy::Report);
        assert!(matches!(e, Err(Error::Domain(_))));
        let e = large_sieve_check(&fam, &|_| Complex64::new(1.0, 0.0), 10.0, 40.0, 1, RangePolicy::Enforce);
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn large_sieve_log_domain_at_high_k() {
        let fam = enumerate_family(2000.0).unwrap();
        let r = large_sieve_check(&fam, &|_| Complex64::new(1.0, 0.0), 10.0, 40.0, 200, RangePolicy::Report).unwrap();
        assert!(r.log_lhs.is_finite() && r.log_rhs.is_finite());
        assert!(r.lhs().is_infinite() || r.lhs().is_finite());
    }

    #[test]
    fn large_sieve_power_means_increase() {
        let fam = enumerate_family(2000.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=6 {
            let r = large_sieve_check(&fam, &|n| Complex64::new(((n % 3) as f64 - 1.0) * 0.9, 0.3), 10.0, 100.0, k, RangePolicy::Report).unwrap();
            let pm = r.log_lhs / (2.0 * k as f64);
            assert!(pm >= prev - 1e-12, "k = {k}");
            prev = pm;
        }
    }

    #[test]
    fn distance_of_sample_to_itself_is_zero() {
        let a = vec![0.1, 0.2, 0.2, 0.5, 0.9];
        assert_eq!(two_sample_distance(&a, &a), 0.0);
    }

    #[test]
    fn distance_with_ties() {
        // F_a jumps to 1 at 0; F_b is 1/2 there
        assert_eq!(two_sample_distance(&[0.0, 0.0], &[0.0, 1.0]), 0.5);
        assert_eq!(two_sample_distance(&[0.0], &[1.0]), 1.0);
        assert!((two_sample_distance(&[1.0, 2.0, 3.0], &[1.5, 2.5]) - 1.0 / 3.0).abs() < 1e-15);
    }

    fn brute_distance(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
        a.iter().chain(b).map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn distance_matches_brute_force(mut a in prop::collection::vec(-5i32..5, 1..30), mut b in prop::collection::vec(-5i32..5, 1..30)) {
            a.sort();
            b.sort();
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert!((two_sample_distance(&a, &b) - brute_distance(&a, &b)).abs() < 1e-15);
        }

        #[test]
        fn distance_invariant_under_monotone_map(mut a in prop::collection::vec(-3.0f64..3.0, 1..40), mut b in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let cube = |v: &[f64]| v.iter().map(|t| t * t * t).collect::<Vec<_>>();
            let d = two_sample_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, two_sample_distance(&cube(&a), &cube(&b)));
        }

        #[test]
        fn pairwise_sum_close_to_naive(v in prop::collection::vec(-1e3f64..1e3, 0..200)) {
            let naive: f64 = v.iter().sum();
            prop_assert!((pairwise_sum(&v) - naive).abs() <= 1e-9 * (1.0 + v.iter().map(|t| t.abs()).sum::<f64>()));
        }
    }

    #[test]
    fn theory_bound_tracks_formula() {
        let x: f64 = 1e4;
        for (z1, z2) in [(1.0, 0.75), (0.9, 0.75)] {
            let (v1, v2) = (v_norm(z1), v_norm(z2));
            let f = |v: f64| v * (x.ln() / v).ln();
            assert_eq!(theory_bound(x, v1) < theory_bound(x, v2), f(v1) < f(v2));
        }
    }

    #[test]
    fn distribution_at_one_is_half_log_derivative() {
        let fam = enumerate_family(1000.0).unwrap();
        let small = Family { x: fam.x, members: fam.members[..6].to_vec() };
        let dist = empirical_distribution(&small, 1.0, DISTRIBUTION_C, NuPolicy::Auto, &EngineConfig::default()).unwrap();
        assert_eq!(dist.v_z, 2.0);
        for e in &dist.entries {
            let ld = LEngine::for_d(e.d).unwrap().log_deriv(Complex64::new(1.0, 0.0)).unwrap();
            assert_eq!(e.value, Some(ld.value.re / 2.0));
        }
    }

    #[test]
    fn discrepancy_needs_enough_draws() {
        let fam = enumerate_family(1000.0).unwrap();
        assert!(matches!(discrepancy(&fam, 0.9, 100, 1, NuPolicy::Auto, &EngineConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn sampling_is_reproducible() {
        let fam = enumerate_family(1e4).unwrap();
        let a = sample_family(&fam, 50, 7).unwrap();
        let b = sample_family(&fam, 50, 7).unwrap();
        let c = sample_family(&fam, 50, 8).unwrap();
        assert_eq!(a.members, b.members);
        assert_ne!(a.members, c.members);
        assert!(a.members.windows(2).all(|w| w[0].d < w[1].d));
        assert!(sample_family(&fam, fam.len() + 1, 7).is_err());
    }

    #[test]
    fn central_moment_dominates_squared_mean() {
        let fam = enumerate_family(1e4).unwrap();
        let small = sample_family(&fam, 12, 3).unwrap();
        let nu = NuPolicy::Auto.value(1e4);
        assert!(central_moments(&small, nu, 1, None, RangePolicy::Enforce, &EngineConfig::default()).is_err());
        let r = central_moments(&small, nu, 1, None, RangePolicy::Report, &EngineConfig::default()).unwrap();
        assert!(!r.in_range);
        assert!(r.moment >= 0.0);
        let n = small.len() as f64;
        assert!(r.moment * n / r.restricted.len() as f64 >= r.mean.norm_sqr() * n * n / (r.restricted.len() as f64).powi(2) - 1e-9);
        assert!(r.moment >= r.mean.norm_sqr());
        assert!(r.restricted.len() + r.excluded.len() == small.len());
    }

    #[test]
    fn rd_statistics_small_sample() {
        let stats = rd_statistics(&[1e3], NuPolicy::Auto, 6, 11, RealScan::default(), true, &EngineConfig::default()).unwrap();
        let s = &stats.per_x[0];
        assert_eq!(s.records.len(), 6);
        assert_eq!(s.histogram.iter().sum::<u32>() as usize, s.certified);
        assert!(s.max <= 25);
        let again = rd_statistics(&[1e3], NuPolicy::Auto, 6, 11, RealScan::default(), true, &EngineConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&stats).unwrap(), serde_json::to_string(&again).unwrap());
    }
}
