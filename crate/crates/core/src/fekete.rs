// SPDX-License-Identifier: Apache-2.0

//! Fekete polynomials `F_d(t) = sum_{n=1}^{d-1} chi_d(n) t^n` on `[0, 1)`,
//! their real zeros, and the Mellin identities
//!
//! ```text
//! L(s) Gamma(s)                      = int_0^inf v^{s-1} G(v) dv
//! Gamma(s) (L'(s) + L(s) psi(s))     = int_0^inf v^{s-1} log v G(v) dv
//! G(v) = F_d(e^{-v}) / (1 - e^{-dv}) = sum_{n>=1} chi_d(n) e^{-nv}
//! ```
//!
//! Values come from compensated Horner evaluation, so the tiny values of
//! `F_d` close to `t = 1` keep their sign. For `v` below `0.05/d` the
//! quotient `G(v)` is replaced by its odd power series
//! `sum_k B_{2k,chi} v^{2k-1} / (2k (2k-1)!)`.

use crate::characters::{kronecker, FundamentalDiscriminant};
use crate::error::{Error, Result};
use crate::lfunc::{digamma, LEngine};
use crate::quad::exp_sinh;
use crate::special::gamma_c;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const EPS: f64 = f64::EPSILON / 2.0;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn gamma_k(k: usize) -> f64 {
    let k = k as f64 * EPS;
    k / (1.0 - k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeketeValue {
    pub value: f64,
    pub err: f64,
}

#[derive(Clone, Debug)]
pub struct FeketePoly {
    d: u64,
    chi: Arc<[i8]>,
}

impl FeketePoly {
    /// Coefficients streamed from the discriminant's residue table.
    pub fn new(fd: &FundamentalDiscriminant) -> Result<Self> {
        Ok(FeketePoly { d: fd.d, chi: fd.table()? })
    }

    /// Coefficients `(d/n)` for any modulus, for fixtures outside the family.
    pub fn from_kronecker(d: u64) -> Result<Self> {
        if d < 3 || d > crate::characters::DEFAULT_TABLE_LIMIT {
            return Err(Error::Domain(format!("Fekete modulus {d} out of range")));
        }
        Ok(FeketePoly { d, chi: (0..d).map(|n| kronecker(d, n)).collect() })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn degree(&self) -> u64 {
        self.d - 1
    }

    /// Highest power that matters at `t`: beyond it the terms sum to less
    /// than `1e-40`, which is added to the error.
    fn effective_degree(&self, t: f64) -> (usize, f64) {
        let full = (self.d - 1) as usize;
        if t <= 0.0 {
            return (0, 0.0);
        }
        let cut = (1e-40 * (1.0 - t)).ln() / t.ln();
        if cut.is_finite() && cut < full as f64 {
            (cut.ceil() as usize, 1e-40)
        } else {
            (full, 0.0)
        }
    }

    /// Compensated Horner evaluation with a running error bound
    /// `eps |F| + gamma_{2n}^2 sum |chi(n)| t^n`.
    pub fn eval(&self, t: f64) -> FeketeValue {
        assert!((0.0..1.0).contains(&t), "Fekete evaluation needs 0 <= t < 1, got {t}");
        let (n, trunc) = self.effective_degree(t);
        if n == 0 {
            return FeketeValue { value: 0.0, err: 0.0 };
        }
        let d = self.d as usize;
        let mut s = self.chi[n % d] as f64;
        let mut c = 0.0;
        for i in (1..n).rev() {
            let (p, pi) = two_prod(s, t);
            let (sn, sigma) = two_sum(p, self.chi[i % d] as f64);
            s = sn;
            c = c * t + (pi + sigma);
        }
        let (p, pi) = two_prod(s, t);
        let value = p + (c * t + pi);
        let g = gamma_k(2 * n + 2);
        let abs_sum = (t / (1.0 - t)).min(n as f64);
        FeketeValue { value, err: EPS * value.abs() + g * g * abs_sum + trunc }
    }

    /// Plain ascending-power summation with Neumaier compensation; a second
    /// route to `F_d(t)` for consistency checks.
    pub fn eval_ascending(&self, t: f64) -> FeketeValue {
        assert!((0.0..1.0).contains(&t));
        let (n, trunc) = self.effective_degree(t);
        let d = self.d as usize;
        let (mut sum, mut comp, mut pow, mut abs) = (0.0f64, 0.0f64, 1.0f64, 0.0f64);
        for i in 1..=n {
            pow *= t;
            let term = self.chi[i % d] as f64 * pow;
            abs += term.abs();
            let (s, e) = two_sum(sum, term);
            sum = s;
            comp += e;
        }
        FeketeValue { value: sum + comp, err: EPS * (sum.abs() + 2.0 * n as f64 * abs) + trunc }
    }

    /// Generalized Bernoulli number `B_{k,chi} = d^{k-1} sum_{a=1}^{d} chi(a) B_k(a/d)`.
    pub fn bernoulli(&self, k: u32) -> f64 {
        let d = self.d as f64;
        let bk = |x: f64| match k {
            2 => x * x - x + 1.0 / 6.0,
            4 => x * x * x * x - 2.0 * x * x * x + x * x - 1.0 / 30.0,
            6 => x.powi(6) - 3.0 * x.powi(5) + 2.5 * x.powi(4) - 0.5 * x * x + 1.0 / 42.0,
            _ => panic!("Bernoulli polynomial of degree {k} not tabulated"),
        };
        let mut acc = 0.0;
        for a in 1..self.d {
            let c = self.chi[a as usize];
            if c != 0 {
                acc += c as f64 * bk(a as f64 / d);
            }
        }
        d.powi(k as i32 - 1) * acc
    }

    /// `G(v) = sum_{n>=1} chi(n) e^{-nv}` for even characters.
    pub fn g(&self, v: f64, series: &[f64; 3]) -> f64 {
        let d = self.d as f64;
        if v < 0.05 / d {
            let v2 = v * v;
            v * (series[0] + v2 * (series[1] + v2 * series[2]))
        } else {
            self.eval((-v).exp()).value / -(-d * v).exp_m1()
        }
    }

    /// Coefficients of the small-`v` series of `G`.
    pub fn g_series(&self) -> [f64; 3] {
        [self.bernoulli(2) / 2.0, self.bernoulli(4) / 24.0, self.bernoulli(6) / 720.0]
    }
}

pub fn fekete_eval(d: u64, t: f64) -> Result<FeketeValue> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("Fekete evaluation needs 0 <= t < 1, got {t}")));
    }
    Ok(FeketePoly::new(&FundamentalDiscriminant::from_d(d)?)?.eval(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeketeRoot {
    pub loc: f64,
    pub halfwidth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeketeZeros {
    pub d: u64,
    /// Number of grid intervals.
    pub grid: usize,
    /// Certified sign changes; a lower bound for the number of zeros.
    pub count: u32,
    pub zeros: Vec<FeketeRoot>,
    /// Grid points where `|F_d|` did not exceed three times its error bound.
    pub suspects: Vec<f64>,
}

/// Grid in `v = -log t`, geometric between `V_HI` and `V_LO_SCALE / d`.
/// Outside it `F_d` is positive: near `t = 0` because `F_d(t) = t + O(t^2)`,
/// near `t = 1` because `G(v) ~ B_{2,chi} v / 2` with `B_{2,chi} > 0`.
const V_HI: f64 = 40.0;
const V_LO_SCALE: f64 = 0.01;

fn grid_v(d: u64, intervals: usize, k: usize) -> f64 {
    let lo = V_LO_SCALE / d as f64;
    V_HI * (lo / V_HI).powf(k as f64 / intervals as f64)
}

/// Sign changes of `F_d` on `(0, 1)`. Doubling `grid` refines the previous
/// grid, so the count can only grow.
pub fn fekete_real_zeros_of(poly: &FeketePoly, grid: usize, refine_tol: f64) -> Result<FeketeZeros> {
    if grid < 2 || !(refine_tol > 0.0) {
        return Err(Error::Domain(format!("need at least 2 grid intervals and refine_tol > 0 (got {grid}, {refine_tol})")));
    }
    let at = |t: f64| {
        let v = poly.eval(t);
        (v.value, v.value.abs() > 3.0 * v.err)
    };
    let mut zeros = Vec::new();
    let mut suspects = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for k in 0..=grid {
        let t = (-grid_v(poly.d, grid, k)).exp();
        let (f, ok) = at(t);
        if !ok {
            suspects.push(t);
            continue;
        }
        if let Some((tp, fp)) = last {
            if fp.signum() != f.signum() {
                let (mut lo, mut hi) = (tp, t);
                'outer: while hi - lo > 2.0 * refine_tol {
                    for frac in [0.5, 0.4, 0.6] {
                        let m = lo + frac * (hi - lo);
                        let (fm, okm) = at(m);
                        if okm {
                            if fm.signum() == fp.signum() {
                                lo = m;
                            } else {
                                hi = m;
                            }
                            continue 'outer;
                        }
                    }
                    break;
                }
                zeros.push(FeketeRoot { loc: 0.5 * (lo + hi), halfwidth: 0.5 * (hi - lo) });
            }
        }
        last = Some((t, f));
    }
    Ok(FeketeZeros { d: poly.d, grid, count: zeros.len() as u32, zeros, suspects })
}

/// Default grid: `16 d` intervals.
pub fn fekete_real_zeros(d: u64, grid: Option<usize>, refine_tol: f64) -> Result<FeketeZeros> {
    let poly = FeketePoly::new(&FundamentalDiscriminant::from_d(d)?)?;
    fekete_real_zeros_of(&poly, grid.unwrap_or(16 * d as usize), refine_tol)
}

/// Largest modulus accepted by the Mellin check.
pub const MELLIN_MAX_D: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MellinReport {
    pub d: u64,
    pub s: f64,
    /// `L(s) Gamma(s)` and its integral.
    pub lhs1: f64,
    pub rhs1: f64,
    pub residual1: f64,
    /// `Gamma(s) (L'(s) + L(s) psi(s))` and its integral.
    pub lhs2: f64,
    pub rhs2: f64,
    pub residual2: f64,
    pub evals: usize,
}

pub fn mellin_identity_check_of(engine: &LEngine, poly: &FeketePoly, s: f64) -> Result<MellinReport> {
    if !(s > 0.5 && s <= 1.0) {
        return Err(Error::Domain(format!("Mellin check needs 1/2 < s <= 1, got {s}")));
    }
    if poly.d() != engine.d() {
        return Err(Error::Domain("engine and polynomial belong to different discriminants".into()));
    }
    if poly.d() > MELLIN_MAX_D {
        return Err(Error::Resource(format!("Mellin check limited to d <= {MELLIN_MAX_D}")));
    }
    let series = poly.g_series();
    let q1 = exp_sinh(|v| v.powf(s - 1.0) * poly.g(v, &series), 1e-13)?;
    let q2 = exp_sinh(|v| v.powf(s - 1.0) * v.ln() * poly.g(v, &series), 1e-13)?;
    let r = engine.l_prime(s)?;
    let gamma = gamma_c(Complex64::new(s, 0.0)).re;
    let lhs1 = r.l * gamma;
    let lhs2 = gamma * (r.l_prime + r.l * digamma(s));
    Ok(MellinReport {
        d: poly.d(),
        s,
        lhs1,
        rhs1: q1.value,
        residual1: (lhs1 - q1.value).abs() / lhs1.abs(),
        lhs2,
        rhs2: q2.value,
        residual2: (lhs2 - q2.value).abs() / lhs2.abs(),
        evals: q1.evals + q2.evals,
    })
}

pub fn mellin_identity_check(d: u64, s: f64) -> Result<MellinReport> {
    let fd = FundamentalDiscriminant::from_d(d)?;
    let poly = FeketePoly::new(&fd)?;
    let engine = LEngine::with_defaults(fd)?;
    mellin_identity_check_of(&engine, &poly, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f8_values() {
        assert_eq!(fekete_eval(8, 0.0).unwrap().value, 0.0);
        let v = fekete_eval(8, 0.5).unwrap();
        assert!((v.value - 45.0 / 128.0).abs() <= v.err.max(1e-16));
        // t (1-t)^2 (1+t)^2 (1+t^2) near 1
        let t = 0.999_999;
        let hand = t * (1.0 - t) * (1.0 - t) * (1.0 + t) * (1.0 + t) * (1.0 + t * t);
        let v = fekete_eval(8, t).unwrap();
        assert!((v.value - hand).abs() < 1e-12 * hand.abs() + v.err);
    }

    #[test]
    fn bernoulli_for_8() {
        let p = FeketePoly::new(&FundamentalDiscriminant::from_d(8).unwrap()).unwrap();
        assert!((p.bernoulli(2) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn g_series_joins_direct_value() {
        let p = FeketePoly::new(&FundamentalDiscriminant::from_d(8).unwrap()).unwrap();
        let s = p.g_series();
        let v = 0.05 / 8.0;
        let below = p.g(v * (1.0 - 1e-12), &s);
        let direct: f64 = (1..20_000).map(|n| p.chi[n % 8] as f64 * (-(n as f64) * v).exp()).sum();
        assert!((below - direct).abs() < 1e-12 * direct.abs(), "{below} vs {direct}");
    }

    #[test]
    fn no_zeros_for_8_and_5() {
        assert_eq!(fekete_real_zeros(8, None, 1e-12).unwrap().count, 0);
        let p5 = FeketePoly::from_kronecker(5).unwrap();
        assert_eq!(fekete_real_zeros_of(&p5, 80, 1e-12).unwrap().count, 0);
    }

    #[test]
    fn mellin_identities_for_8() {
        for s in [0.75, 1.0] {
            let r = mellin_identity_check(8, s).unwrap();
            assert!(r.residual1 < 1e-6, "{r:?}");
            assert!(r.residual2 < 1e-5, "{r:?}");
        }
        let r = mellin_identity_check(8, 1.0).unwrap();
        assert!((r.lhs1 - 0.6232252401402305).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn summation_order_agrees(m in 1u64..400, t in 0.0f64..0.9999) {
            let m = 2 * m + 1;
            prop_assume!(crate::primes::is_squarefree(m));
            let p = FeketePoly::new(&FundamentalDiscriminant::from_m(m).unwrap()).unwrap();
            let a = p.eval(t);
            let b = p.eval_ascending(t);
            prop_assert!((a.value - b.value).abs() <= a.err + b.err);
        }

        #[test]
        fn refinement_never_loses_sign_changes(m in 1u64..120, k in 6usize..9) {
            let m = 2 * m + 1;
            prop_assume!(crate::primes::is_squarefree(m));
            let p = FeketePoly::new(&FundamentalDiscriminant::from_m(m).unwrap()).unwrap();
            let coarse = fekete_real_zeros_of(&p, 1 << k, 1e-9).unwrap().count;
            let fine = fekete_real_zeros_of(&p, 1 << (k + 1), 1e-9).unwrap().count;
            prop_assert!(fine >= coarse);
        }
    }
}
