// SPDX-License-Identifier: Apache-2.0

//! The random multiplicative model `X(n)`: independent `X(p)` for odd primes
//! with `P(X(p) = +1) = P(X(p) = -1) = p/(2(p+1))`, `P(X(p) = 0) = 1/(p+1)`,
//! `X(2) = 0`, extended completely multiplicatively.
//!
//! Draws come from ChaCha8 keyed by the 64-bit seed. Realization `i` uses
//! stream `i`, and the value at the `j`-th prime (counting 2, whose word is
//! drawn and ignored) is decided by the `j`-th 32-bit word of that stream, so
//! any realization can be regenerated alone and
//! parallel sampling never shares generator state.

use crate::error::{Error, Result};
use crate::par;
use crate::primes;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

/// Default relative tolerance of the random-series truncation, as a fraction
/// of `V_z`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-2;

/// Rosser–Schoenfeld: `pi(t) < 1.25506 t / ln t` for `t > 1`.
const PRIME_COUNT_CONST: f64 = 1.255_06;

/// Thresholds on a uniform 32-bit word: below `zero` gives 0, below `plus`
/// gives +1, otherwise -1.
#[derive(Clone, Copy, Debug)]
struct Law {
    zero: u64,
    plus: u64,
}

impl Law {
    fn for_prime(p: u64) -> Self {
        let total = 1u64 << 32;
        let zero = ((total as f64) / (p as f64 + 1.0)).round() as u64;
        let plus = zero + (total - zero) / 2;
        Law { zero, plus }
    }

    #[inline]
    fn draw(&self, word: u32) -> i8 {
        let w = word as u64;
        if w < self.zero {
            0
        } else if w < self.plus {
            1
        } else {
            -1
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One realization of `X(p)` for all primes `p <= P`.
#[derive(Clone, Debug)]
pub struct RandomAssignment {
    pub seed: u64,
    pub prime_cutoff: u64,
    primes: Arc<Vec<u64>>,
    values: Vec<i8>,
}

impl RandomAssignment {
    fn generate(seed: u64, stream: u64, primes: Arc<Vec<u64>>) -> Self {
        let mut rng = stream_rng(seed, stream);
        let values = primes
            .iter()
            .map(|&p| {
                let word = rng.next_u32();
                if p == 2 {
                    0
                } else {
                    Law::for_prime(p).draw(word)
                }
            })
            .collect();
        let prime_cutoff = primes.last().copied().unwrap_or(0);
        RandomAssignment { seed, prime_cutoff, primes, values }
    }

    /// An assignment with prescribed values (for tests and worked examples).
    pub fn from_fn(prime_cutoff: u64, f: impl Fn(u64) -> i8) -> Result<Self> {
        let primes = Arc::new(primes::primes_up_to(prime_cutoff));
        let values = primes.iter().map(|&p| if p == 2 { 0 } else { f(p).signum() }).collect();
        Ok(RandomAssignment { seed: 0, prime_cutoff, primes, values })
    }

    /// `X(p)`, or `None` when `p` is not a prime up to the cutoff.
    pub fn value_at(&self, p: u64) -> Option<i8> {
        self.primes.binary_search(&p).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, i8)> + '_ {
        self.primes.iter().copied().zip(self.values.iter().copied())
    }
}

pub fn sample_assignment(seed: u64, prime_cutoff: u64) -> Result<RandomAssignment> {
    if prime_cutoff < 3 {
        return Err(Error::Domain(format!("prime cutoff must be at least 3, got {prime_cutoff}")));
    }
    let primes = Arc::new(primes::primes_up_to(prime_cutoff));
    let mut a = RandomAssignment::generate(seed, 0, primes);
    a.prime_cutoff = prime_cutoff;
    Ok(a)
}

/// `X(n)` under an assignment.
pub fn x_of(n: u64, a: &RandomAssignment) -> Result<i8> {
    if n == 0 {
        return Err(Error::Domain("X(n) needs n >= 1".into()));
    }
    let mut out = 1i8;
    for (p, e) in primes::factorize(n) {
        let v = a
            .value_at(p)
            .ok_or_else(|| Error::Domain(format!("prime factor {p} of {n} exceeds the cutoff {}", a.prime_cutoff)))?;
        if e % 2 == 1 {
            out *= v;
        } else {
            out *= v * v;
        }
    }
    Ok(out)
}

/// Exact `E[X(n)]`.
pub fn expect_x(n: u64) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::Domain("E[X(n)] needs n >= 1".into()));
    }
    let mut out = BigRational::one();
    for (p, e) in primes::factorize(n) {
        if p == 2 || e % 2 == 1 {
            return Ok(BigRational::zero());
        }
        out *= BigRational::new(BigInt::from(p), BigInt::from(p + 1));
    }
    Ok(out)
}

/// `V_z = 1/(z - 1/2)`.
pub fn v_norm(z: f64) -> f64 {
    1.0 / (z - 0.5)
}

/// `E[X(p) log p / (p^z - X(p))] = (p/(p+1)) log p / (p^{2z} - 1)`.
pub fn term_expectation(p: u64, z: f64) -> f64 {
    let pf = p as f64;
    pf / (pf + 1.0) * pf.ln() / (pf.powf(2.0 * z) - 1.0)
}

/// Majorant of the root-mean-square size of the omitted tail
/// `sum_{p > P} X(p) log p / (p^z - X(p))`:
/// `|mean| + sd`, with `mean <= sum_{p>P} log p/(p^{2z}-1)` and
/// `var <= sum_{p>P} (log p)^2/(p^z-1)^2`, each bounded by partial summation
/// against `pi(t) < 1.25506 t/ln t`.
pub fn tail_bound(z: f64, prime_cutoff: u64) -> f64 {
    let p = (prime_cutoff.max(17)) as f64;
    let l0 = p.ln();
    let c = 2.0 * z - 1.0;
    let g = PRIME_COUNT_CONST * p / l0;
    let decay = (-c * l0).exp();
    let f1 = l0 / (p.powf(2.0 * z) - 1.0);
    let k1 = 1.0 / (1.0 - p.powf(-2.0 * z));
    let mean = g * f1 + PRIME_COUNT_CONST * k1 * decay / c;
    let f2 = l0 * l0 / (p.powf(z) - 1.0).powi(2);
    let k2 = 1.0 / (1.0 - p.powf(-z)).powi(2);
    let var = g * f2 + PRIME_COUNT_CONST * k2 * decay * (l0 / c + 1.0 / (c * c));
    mean + var.sqrt()
}

/// Largest prime cutoff the samplers will sieve to.
pub const MAX_CUTOFF: u64 = 1 << 26;

/// Smallest power-of-two cutoff (from 1024) whose tail bound is at most
/// `rel_tol * V_z`. The tail decays like `P^{-(z - 1/2)}`, so for `z` close
/// to `1/2` the required cutoff can exceed `MAX_CUTOFF`.
pub fn default_cutoff(z: f64, rel_tol: f64) -> Result<u64> {
    check_z(z)?;
    let target = rel_tol * v_norm(z);
    let mut p = 1024u64;
    while tail_bound(z, p) > target {
        if p >= MAX_CUTOFF {
            return Err(Error::Truncation { tail_bound: tail_bound(z, p), tolerance: target, suggested_cutoff: 2 * p });
        }
        p *= 2;
    }
    Ok(p)
}

fn check_z(z: f64) -> Result<()> {
    if !(z > 0.5 && z <= 1.0) {
        return Err(Error::Domain(format!("z must lie in (1/2, 1], got {z}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandSeries {
    pub z: f64,
    pub prime_cutoff: u64,
    pub value: f64,
    pub tail_bound: f64,
}

impl RandSeries {
    pub fn csv_header() -> &'static str {
        "seed,z,P,value,tail_bound"
    }

    pub fn csv_row(&self, seed: u64) -> String {
        format!("{seed},{},{},{:.17e},{:.6e}", self.z, self.prime_cutoff, self.value, self.tail_bound)
    }
}

/// One draw of the truncated random series at `z` under assignment `a`,
/// refusing cutoffs whose tail bound exceeds `tolerance` (absolute).
pub fn sample_l_rand(z: f64, a: &RandomAssignment, tolerance: f64) -> Result<RandSeries> {
    check_z(z)?;
    let tb = tail_bound(z, a.prime_cutoff);
    if tb > tolerance {
        let mut suggested = a.prime_cutoff.max(1024);
        while tail_bound(z, suggested) > tolerance && suggested < (1 << 40) {
            suggested *= 2;
        }
        return Err(Error::Truncation { tail_bound: tb, tolerance, suggested_cutoff: suggested });
    }
    let mut value = 0.0;
    for (p, x) in a.iter() {
        if x != 0 {
            let pf = p as f64;
            value += x as f64 * pf.ln() / (pf.powf(z) - x as f64);
        }
    }
    Ok(RandSeries { z, prime_cutoff: a.prime_cutoff, value, tail_bound: tb })
}

/// Precomputed per-prime terms for fast repeated sampling at fixed `z`, `P`.
#[derive(Clone, Debug)]
pub struct RandSeriesSampler {
    pub z: f64,
    pub prime_cutoff: u64,
    pub tail_bound: f64,
    laws: Vec<Law>,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl RandSeriesSampler {
    pub fn new(z: f64, prime_cutoff: u64) -> Result<Self> {
        check_z(z)?;
        if prime_cutoff < 3 || prime_cutoff > MAX_CUTOFF {
            return Err(Error::Domain(format!("prime cutoff must lie in [3, {MAX_CUTOFF}], got {prime_cutoff}")));
        }
        let odd: Vec<u64> = primes::primes_up_to(prime_cutoff).into_iter().filter(|&p| p > 2).collect();
        let laws = odd.iter().map(|&p| Law::for_prime(p)).collect();
        let plus = odd.iter().map(|&p| (p as f64).ln() / ((p as f64).powf(z) - 1.0)).collect();
        let minus = odd.iter().map(|&p| -(p as f64).ln() / ((p as f64).powf(z) + 1.0)).collect();
        Ok(RandSeriesSampler { z, prime_cutoff, tail_bound: tail_bound(z, prime_cutoff), laws, plus, minus })
    }

    /// Sampler at the default cutoff for relative tolerance `rel_tol`.
    pub fn with_tolerance(z: f64, rel_tol: f64) -> Result<Self> {
        Self::new(z, default_cutoff(z, rel_tol)?)
    }

    /// Realization number `index` under `seed`. Matches `sample_l_rand` on the
    /// assignment of the same seed and stream.
    pub fn draw(&self, seed: u64, index: u64) -> f64 {
        let mut rng = stream_rng(seed, index);
        // Word 0 of the stream belongs to p = 2, whose value is fixed.
        let _ = rng.next_u32();
        let mut value = 0.0;
        for i in 0..self.laws.len() {
            match self.laws[i].draw(rng.next_u32()) {
                1 => value += self.plus[i],
                -1 => value += self.minus[i],
                _ => {}
            }
        }
        value
    }

    /// `n` draws (indices `0..n`) in index order.
    pub fn draws(&self, seed: u64, n: usize) -> Vec<f64> {
        par::map_range(n, |i| self.draw(seed, i as u64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharFnEstimate {
    pub u: f64,
    pub value: Complex64,
    pub std_err: f64,
}

/// Monte Carlo estimate of `E[exp(2 pi i u L_rand(z)/V_z)]` from the given
/// draws of `L_rand(z)`.
pub fn char_fn_from_draws(z: f64, u: f64, draws: &[f64]) -> CharFnEstimate {
    let v = v_norm(z);
    let n = draws.len().max(1) as f64;
    let vals: Vec<Complex64> = draws.iter().map(|x| Complex64::from_polar(1.0, 2.0 * PI * u * x / v)).collect();
    let mean = vals.iter().sum::<Complex64>() / n;
    let ss: f64 = vals.iter().map(|w| (w - mean).norm_sqr()).sum();
    let std_err = if draws.len() > 1 { (ss / (n * (n - 1.0))).sqrt() } else { f64::INFINITY };
    CharFnEstimate { u, value: mean, std_err }
}

/// Monte Carlo characteristic function at the default cutoff.
pub fn char_fn_rand(z: f64, u: f64, n_samples: usize, seed: u64) -> Result<CharFnEstimate> {
    if n_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let sampler = RandSeriesSampler::with_tolerance(z, DEFAULT_TAIL_TOLERANCE)?;
    Ok(char_fn_from_draws(z, u, &sampler.draws(seed, n_samples)))
}

/// Exact characteristic function of the truncated series, as the product of
/// the per-prime three-point expectations.
pub fn char_fn_exact(z: f64, u: f64, prime_cutoff: u64) -> Result<Complex64> {
    check_z(z)?;
    let v = v_norm(z);
    let mut prod = Complex64::new(1.0, 0.0);
    for p in primes::primes_up_to(prime_cutoff).into_iter().filter(|&p| p > 2) {
        let pf = p as f64;
        let lp = pf.ln();
        let tp = lp / (pf.powf(z) - 1.0);
        let tm = -lp / (pf.powf(z) + 1.0);
        let w = pf / (2.0 * (pf + 1.0));
        let f = Complex64::new(1.0 / (pf + 1.0), 0.0)
            + (Complex64::from_polar(1.0, 2.0 * PI * u * tp / v) + Complex64::from_polar(1.0, 2.0 * PI * u * tm / v)) * w;
        prod *= f;
    }
    Ok(prod)
}

/// Caps for the exact moment expansion.
#[derive(Clone, Copy, Debug)]
pub struct MomentBudget {
    pub max_y: u64,
    pub max_k: u32,
    /// Bound on (monomials kept) x (support size) x k.
    pub max_work: u64,
}

impl Default for MomentBudget {
    fn default() -> Self {
        MomentBudget { max_y: 30, max_k: 6, max_work: 50_000_000 }
    }
}

/// Exponent class of a monomial in `X(p)` over the odd primes up to `Y`:
/// which primes appear, and which appear to an odd power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Signature {
    present: u32,
    odd: u32,
}

/// Exact `E[(sum_{n <= Y} b(n) X(n))^k]`.
pub fn moment_rand(b: &BTreeMap<u64, BigRational>, y: u64, k: u32, budget: MomentBudget) -> Result<BigRational> {
    if y > budget.max_y || k > budget.max_k {
        return Err(Error::Resource(format!(
            "exact moment needs Y <= {} and k <= {} (got Y = {y}, k = {k})",
            budget.max_y, budget.max_k
        )));
    }
    let odd_primes: Vec<u64> = primes::primes_up_to(y).into_iter().filter(|&p| p > 2).collect();
    if odd_primes.len() > 32 {
        return Err(Error::Resource(format!("exact moment supports at most 32 odd primes, Y = {y} has {}", odd_primes.len())));
    }
    let mut support: Vec<(Signature, BigRational)> = Vec::new();
    for (&n, c) in b.range(1..=y) {
        if c.is_zero() || n % 2 == 0 {
            continue;
        }
        let mut sig = Signature { present: 0, odd: 0 };
        for (p, e) in primes::factorize(n) {
            let bit = 1u32 << odd_primes.iter().position(|&q| q == p).expect("prime below Y");
            sig.present |= bit;
            if e % 2 == 1 {
                sig.odd |= bit;
            }
        }
        support.push((sig, c.clone()));
    }
    if k == 0 {
        return Ok(BigRational::one());
    }
    let mut poly: HashMap<Signature, BigRational> = HashMap::new();
    poly.insert(Signature { present: 0, odd: 0 }, BigRational::one());
    for _ in 0..k {
        let work = (poly.len() as u64) * (support.len() as u64) * k as u64;
        if work > budget.max_work {
            return Err(Error::Resource(format!("moment expansion needs {work} steps, budget {}", budget.max_work)));
        }
        let mut next: HashMap<Signature, BigRational> = HashMap::new();
        for (sig, c) in &poly {
            for (s2, c2) in &support {
                let key = Signature { present: sig.present | s2.present, odd: sig.odd ^ s2.odd };
                *next.entry(key).or_insert_with(BigRational::zero) += c * c2;
            }
        }
        poly = next;
    }
    let mut total = BigRational::zero();
    for (sig, c) in poly {
        if sig.odd != 0 || c.is_zero() {
            continue;
        }
        let mut e = BigRational::one();
        for (i, &p) in odd_primes.iter().enumerate() {
            if sig.present & (1 << i) != 0 {
                e *= BigRational::new(BigInt::from(p), BigInt::from(p + 1));
            }
        }
        total += c * e;
    }
    Ok(total)
}

/// Indicator of the primes up to `y`, as an exact coefficient map.
pub fn prime_indicator(y: u64) -> BTreeMap<u64, BigRational> {
    primes::primes_up_to(y).into_iter().map(|p| (p, BigRational::one())).collect()
}
