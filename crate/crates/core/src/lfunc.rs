// SPDX-License-Identifier: Apache-2.0

//! Evaluation of `Lambda(s)`, `L(s)`, `L'(s)` and `-L'/L(s)` for one character.
//!
//! The completed function `Lambda(s) = (d/pi)^{s/2} Gamma(s/2) L(s)` is summed
//! with the incomplete-gamma approximate functional equation
//!
//! ```text
//! Lambda(s) = sum_n chi(n) [ x_n^{-s/2} Gamma(s/2, A x_n) + x_n^{-(1-s)/2} Gamma((1-s)/2, x_n / A) ]
//! ```
//!
//! with `x_n = pi n^2 / d`. Any split `A > 0` gives the same value, which makes
//! a non-trivial check of the root number: with `A != 1` the two sides of
//! `Lambda(s) = Lambda(1-s)` are computed from different sums.

use crate::characters::FundamentalDiscriminant;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::special::{self, expm1_over, gamma, lower_series, prefer_series, upper_fraction, upper_gamma_small_a};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Real-part range accepted by the public evaluators. The contour code reaches
/// a little outside the critical strip, the Dirichlet-series checks use `s = 2`.
pub const RE_MIN: f64 = -1.0;
pub const RE_MAX: f64 = 2.5;
pub const IM_MAX: f64 = 60.0;

/// Step used for complex-step differentiation.
pub const COMPLEX_STEP: f64 = 1e-20;

const EPS: f64 = f64::EPSILON;
/// Per-term rounding allowance, in units of machine epsilon.
const ROUNDING_ULPS: f64 = 32.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Absolute accuracy goal for the truncated sum.
    pub eps_target: f64,
    /// Split parameter `A` of the functional equation.
    pub split: f64,
    /// Largest admissible number of terms.
    pub max_terms: usize,
    /// `log_deriv` refuses points with `|L(s)|` below this.
    pub floor: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { eps_target: 1e-15, split: 1.0, max_terms: 1 << 22, floor: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Term {
    chi: f64,
    x: f64,
    ln_x: f64,
}

/// A configured evaluator for one discriminant. Immutable after construction.
#[derive(Clone, Debug)]
pub struct LEngine {
    fd: FundamentalDiscriminant,
    config: EngineConfig,
    n_trunc: usize,
    terms: Vec<Term>,
    ln_q_over_pi: f64,
    x_next: f64,
    x_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LValue {
    pub s: Complex64,
    pub lambda: Complex64,
    pub lambda_err: f64,
    pub l: Complex64,
    /// Error estimate on `l`.
    pub err_est: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealDerivative {
    pub sigma: f64,
    pub l: f64,
    pub l_err: f64,
    pub l_prime: f64,
    pub l_prime_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDerivative {
    pub s: Complex64,
    /// `-L'(s)/L(s)`.
    pub value: Complex64,
    pub err_est: f64,
    pub abs_l: f64,
}

/// Taylor jets of `Lambda` and `L` at a point, with per-coefficient errors.
#[derive(Clone, Copy, Debug)]
pub struct LTaylor<const K: usize> {
    pub lambda: Jet<K>,
    pub lambda_err: [f64; K],
    pub l: Jet<K>,
    pub l_err: [f64; K],
}

struct Acc<const K: usize> {
    value: Jet<K>,
    abs: [f64; K],
    abs_im: f64,
}

impl<const K: usize> Acc<K> {
    #[inline]
    fn mass(&mut self, p: &Jet<K>) {
        for k in 0..K {
            self.abs[k] += p.0[k].l1_norm();
        }
        self.abs_im += p.0[0].im.abs();
    }
}

struct LambdaSum<const K: usize> {
    value: Jet<K>,
    err: [f64; K],
    err_im: f64,
}

impl LEngine {
    pub fn new(fd: FundamentalDiscriminant, config: EngineConfig) -> Result<Self> {
        if !(config.eps_target > 0.0 && config.eps_target < 1.0) {
            return Err(Error::Domain(format!("eps_target must lie in (0, 1), got {}", config.eps_target)));
        }
        if !(config.split > 0.0 && config.split.is_finite()) {
            return Err(Error::Domain(format!("split must be positive, got {}", config.split)));
        }
        let q = fd.d as f64;
        let a_min = config.split.min(1.0 / config.split);
        let need = (q * ((1.0 / config.eps_target).ln() + 5.0) / (PI * a_min)).sqrt().ceil() as usize;
        let n_trunc = need.max(1);
        if n_trunc > config.max_terms {
            return Err(Error::TruncationBudget { required: n_trunc, available: config.max_terms });
        }
        let terms = (1..=n_trunc as u64)
            .filter_map(|n| {
                let c = fd.chi(n);
                (c != 0).then(|| {
                    let x = PI * (n as f64) * (n as f64) / q;
                    Term { chi: c as f64, x, ln_x: x.ln() }
                })
            })
            .collect();
        let nn = n_trunc as f64;
        let x_next = PI * (nn + 1.0) * (nn + 1.0) / q;
        let x_gap = PI * (2.0 * nn + 3.0) / q;
        Ok(LEngine { ln_q_over_pi: (q / PI).ln(), fd, config, n_trunc, terms, x_next, x_gap })
    }

    pub fn with_defaults(fd: FundamentalDiscriminant) -> Result<Self> {
        Self::new(fd, EngineConfig::default())
    }

    /// Engine for `d = 8m`, building the discriminant from `d`.
    pub fn for_d(d: u64) -> Result<Self> {
        Self::with_defaults(FundamentalDiscriminant::from_d(d)?)
    }

    pub fn discriminant(&self) -> &FundamentalDiscriminant {
        &self.fd
    }

    pub fn d(&self) -> u64 {
        self.fd.d
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    fn check_domain(s: Complex64) -> Result<()> {
        if !(s.re >= RE_MIN && s.re <= RE_MAX && s.im.abs() <= IM_MAX) {
            return Err(Error::Domain(format!(
                "s = {s} is outside the evaluation region {RE_MIN} <= Re s <= {RE_MAX}, |Im s| <= {IM_MAX}"
            )));
        }
        Ok(())
    }

    /// Bound on `sum_{n > N} |x_n^{-a} Gamma(a, A x_n)|` for `Re a = sigma`.
    fn tail(&self, sigma: f64, split: f64) -> f64 {
        let big_x = split * self.x_next;
        let excess = (sigma - 1.0).max(0.0);
        if big_x <= 2.0 * excess {
            return f64::INFINITY;
        }
        let lead = split.powf(sigma - 1.0) * (-big_x).exp() / self.x_next / (1.0 - excess / big_x);
        lead / (1.0 - (-split * self.x_gap).exp())
    }

    fn half_sum<const K: usize>(&self, a: Jet<K>, split: f64, acc: &mut Acc<K>) -> Result<()> {
        let pow_split = a.scale(split.ln()).exp();
        let mut gamma_a: Option<Jet<K>> = None;
        let near_pole = a.value().norm() < 0.1;
        for t in &self.terms {
            let big_x = split * t.x;
            let e = (-big_x).exp();
            let piece = if near_pole && big_x < 2.0 {
                let p = a.scale(-t.ln_x).exp() * upper_gamma_small_a(a, big_x)?;
                acc.mass(&p.scale(4.0));
                p
            } else if prefer_series(a.value(), big_x) {
                let g = *gamma_a.get_or_insert_with(|| gamma(a));
                let p1 = a.scale(-t.ln_x).exp() * g;
                let p2 = pow_split * lower_series(a, big_x)? * e;
                acc.mass(&p1);
                acc.mass(&p2);
                p1 - p2
            } else {
                let p = pow_split * upper_fraction(a, big_x)? * e;
                acc.mass(&p);
                p
            };
            acc.value += piece * t.chi;
        }
        Ok(())
    }

    fn lambda_sum<const K: usize>(&self, s: Jet<K>) -> Result<LambdaSum<K>> {
        let split = self.config.split;
        let a = s * 0.5;
        let b = (-s + 1.0) * 0.5;
        let mut acc = Acc { value: Jet::<K>::real(0.0), abs: [0.0; K], abs_im: 0.0 };
        self.half_sum(a, split, &mut acc)?;
        self.half_sum(b, 1.0 / split, &mut acc)?;
        let tail = self.tail(a.value().re, split) + self.tail(b.value().re, 1.0 / split);
        let log_scale = 2.0 + self.x_next.ln().abs() + split.ln().abs();
        let mut err = [0.0; K];
        for (k, e) in err.iter_mut().enumerate() {
            *e = ROUNDING_ULPS * EPS * acc.abs[k] + tail * log_scale.powi(k as i32);
        }
        if !acc.value.is_finite() {
            return Err(Error::Conditioning(format!("non-finite sum at s = {}", s.value())));
        }
        let err_im = ROUNDING_ULPS * EPS * acc.abs_im + tail * COMPLEX_STEP * log_scale;
        Ok(LambdaSum { value: acc.value, err, err_im })
    }

    /// `(d/pi)^{s/2} Gamma(s/2)` as a jet.
    fn gamma_factor<const K: usize>(&self, s: Jet<K>) -> Result<Jet<K>> {
        let a = s * 0.5;
        let nearest = (-a.value().re).round().max(0.0);
        if (a.value() + nearest).norm() < 1e-8 {
            return Err(Error::Conditioning(format!("s = {} is at a pole of the gamma factor", s.value())));
        }
        Ok(a.scale(self.ln_q_over_pi).exp() * gamma(a))
    }

    /// `Lambda(s)` without the region check. Used by the disc expansions,
    /// which sample slightly outside the public region.
    pub(crate) fn lambda_raw(&self, s: Complex64) -> Result<(Complex64, f64)> {
        let r = self.lambda_sum(Jet::<1>::constant(s))?;
        Ok((r.value.value(), r.err[0]))
    }

    pub fn completed_lambda(&self, s: Complex64) -> Result<LValue> {
        Self::check_domain(s)?;
        self.value_at(s)
    }

    fn value_at(&self, s: Complex64) -> Result<LValue> {
        let sj = Jet::<1>::constant(s);
        let r = self.lambda_sum(sj)?;
        let g = self.gamma_factor(sj)?.value();
        let lambda = r.value.value();
        let l = lambda / g;
        let err_est = r.err[0] / g.norm() + 1e-14 * l.norm();
        Ok(LValue { s, lambda, lambda_err: r.err[0], l, err_est })
    }

    pub fn l_value(&self, s: Complex64) -> Result<LValue> {
        Self::check_domain(s)?;
        self.value_at(s)
    }

    /// `L(sigma)` and `L'(sigma)` on the real axis by complex-step
    /// differentiation: one complex evaluation at `sigma + i h`.
    pub fn l_prime(&self, sigma: f64) -> Result<RealDerivative> {
        let s = Complex64::new(sigma, COMPLEX_STEP);
        Self::check_domain(s)?;
        let sj = Jet::<1>::constant(s);
        let r = self.lambda_sum(sj)?;
        let g = self.gamma_factor(sj)?.value();
        let lam = r.value.value();
        let l = lam / g;
        let g2 = g.norm_sqr();
        let gn = g.norm();
        let rel = 1e-14;
        let err_im = (r.err_im * gn + r.err[0] * g.im.abs() + rel * (lam.re.abs() * g.im.abs() + lam.im.abs() * g.re.abs())) / g2;
        Ok(RealDerivative {
            sigma,
            l: l.re,
            l_err: r.err[0] / gn + rel * l.re.abs(),
            l_prime: l.im / COMPLEX_STEP,
            l_prime_err: err_im / COMPLEX_STEP,
        })
    }

    /// Jets of `Lambda` and `L` at `s`.
    pub fn taylor<const K: usize>(&self, s: Complex64) -> Result<LTaylor<K>> {
        Self::check_domain(s)?;
        self.taylor_raw(s)
    }

    pub(crate) fn taylor_raw<const K: usize>(&self, s: Complex64) -> Result<LTaylor<K>> {
        let sj = Jet::<K>::variable(s);
        let r = self.lambda_sum(sj)?;
        let g = self.gamma_factor(sj)?;
        let ginv = g.recip();
        let l = r.value * ginv;
        Ok(LTaylor { lambda: r.value, lambda_err: r.err, l, l_err: propagate_quotient_err(&r.err, &ginv, &l) })
    }

    /// `-L'(s)/L(s)`. Real `s` goes through complex-step, complex `s` through
    /// first-order jets.
    pub fn log_deriv(&self, s: Complex64) -> Result<LogDerivative> {
        Self::check_domain(s)?;
        let (l, dl, el, edl) = if s.im == 0.0 {
            let r = self.l_prime(s.re)?;
            (Complex64::new(r.l, 0.0), Complex64::new(r.l_prime, 0.0), r.l_err, r.l_prime_err)
        } else {
            let t = self.taylor_raw::<2>(s)?;
            (t.l.coeff(0), t.l.coeff(1), t.l_err[0], t.l_err[1])
        };
        let abs_l = l.norm();
        if abs_l <= self.config.floor.max(3.0 * el) {
            return Err(Error::NearZero { abs_l, floor: self.config.floor.max(3.0 * el) });
        }
        let value = -dl / l;
        let err_est = edl / abs_l + dl.norm() * el / (abs_l * abs_l);
        Ok(LogDerivative { s, value, err_est, abs_l })
    }

    /// Taylor model of `Lambda` on a disc, from samples on a larger circle.
    pub fn expansion(&self, center: Complex64, radius: f64) -> Result<LambdaExpansion> {
        LambdaExpansion::build(self, center, radius, DEFAULT_EXPANSION_NODES)
    }
}

/// Error of `lambda * ginv` per coefficient, given errors on `lambda`.
fn propagate_quotient_err<const K: usize>(lambda_err: &[f64; K], ginv: &Jet<K>, l: &Jet<K>) -> [f64; K] {
    let mut out = [0.0; K];
    for k in 0..K {
        let mut e = 1e-14 * l.0[k].norm();
        for j in 0..=k {
            e += lambda_err[j] * ginv.0[k - j].norm();
        }
        out[k] = e;
    }
    out
}

pub const DEFAULT_EXPANSION_NODES: usize = 64;

/// Polynomial model of `Lambda` on `|s - center| <= radius`, built from
/// `nodes` samples on the circle of twice that radius.
#[derive(Clone, Debug)]
pub struct LambdaExpansion {
    pub center: Complex64,
    pub radius: f64,
    pub sample_radius: f64,
    coeffs: Vec<Complex64>,
    max_sample: f64,
    max_sample_err: f64,
    ln_q_over_pi: f64,
}

impl LambdaExpansion {
    pub fn build(engine: &LEngine, center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) || nodes < 8 {
            return Err(Error::Domain(format!("expansion needs radius > 0 and >= 8 nodes (got {radius}, {nodes})")));
        }
        let big_r = 2.0 * radius;
        if center.re - big_r < RE_MIN - 0.5 || center.re + big_r > RE_MAX + 0.3 || center.im.abs() + big_r > IM_MAX + 5.0 {
            return Err(Error::Domain(format!("expansion disc around {center} with radius {radius} is too large")));
        }
        let m = nodes;
        let real_center = center.im == 0.0;
        let mut samples = vec![Complex64::new(0.0, 0.0); m];
        let mut max_sample: f64 = 0.0;
        let mut max_err: f64 = 0.0;
        let half = m / 2;
        for j in 0..m {
            if real_center && j > half {
                samples[j] = samples[m - j].conj();
                continue;
            }
            let w = Complex64::from_polar(big_r, 2.0 * PI * j as f64 / m as f64);
            let (v, e) = engine.lambda_raw(center + w)?;
            samples[j] = v;
            max_sample = max_sample.max(v.norm());
            max_err = max_err.max(e);
        }
        let mut coeffs = Vec::with_capacity(m);
        for k in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, f) in samples.iter().enumerate() {
                let ang = -2.0 * PI * ((j * k) % m) as f64 / m as f64;
                acc += f * Complex64::from_polar(1.0, ang);
            }
            coeffs.push(acc / (m as f64) / big_r.powi(k as i32));
        }
        Ok(LambdaExpansion {
            center,
            radius,
            sample_radius: big_r,
            coeffs,
            max_sample,
            max_sample_err: max_err + EPS * max_sample * (m as f64).sqrt(),
            ln_q_over_pi: engine.ln_q_over_pi,
        })
    }

    /// Bound on `|Lambda - P|` on `|s - center| <= rho`, with `rho` below the
    /// sample radius. The maximum modulus on the sample circle is estimated as
    /// twice the largest sample.
    pub fn error_bound(&self, rho: f64) -> f64 {
        let t = rho / self.sample_radius;
        if t >= 1.0 {
            return f64::INFINITY;
        }
        let m = self.coeffs.len() as i32;
        4.0 * self.max_sample * t.powi(m) / (1.0 - t) + self.max_sample_err / (1.0 - t)
    }

    /// Error bounds on the Taylor coefficients (not derivatives) of the model at a point at
    /// distance `rho` from the center.
    pub fn coeff_error<const K: usize>(&self, rho: f64) -> [f64; K] {
        let mut out = [f64::INFINITY; K];
        if K > 0 {
            out[0] = self.error_bound(rho);
        }
        // Cauchy estimate on a circle between rho and the sample radius; the
        // best intermediate radius depends on k, so try a few.
        for frac in [0.1, 0.2, 0.3, 0.45, 0.6, 0.8] {
            let outer = rho + frac * (self.sample_radius - rho);
            let e = self.error_bound(outer);
            let gap = outer - rho;
            for (k, o) in out.iter_mut().enumerate().skip(1) {
                *o = o.min(e / gap.powi(k as i32));
            }
        }
        out
    }

    /// Jet of the polynomial model at `s`.
    pub fn lambda<const K: usize>(&self, s: Complex64) -> Jet<K> {
        let w = Jet::<K>::variable(s - self.center);
        let mut r = Jet::<K>::real(0.0);
        for c in self.coeffs.iter().rev() {
            r = r * w + *c;
        }
        r
    }

    /// Jet of `L = Lambda / ((d/pi)^{s/2} Gamma(s/2))` with per-coefficient
    /// error bounds.
    pub fn l<const K: usize>(&self, s: Complex64) -> (Jet<K>, [f64; K]) {
        let lam = self.lambda::<K>(s);
        let err = self.coeff_error::<K>((s - self.center).norm());
        let a = Jet::<K>::variable(s) * 0.5;
        let g = a.scale(self.ln_q_over_pi).exp() * gamma(a);
        let ginv = g.recip();
        let l = lam * ginv;
        let l_err = propagate_quotient_err(&err, &ginv, &l);
        (l, l_err)
    }
}

/// Default modulus cap for the Euler–Maclaurin reference.
pub const ORACLE_CAP: u64 = 10_000;

/// `B_{2j} / (2j)!` for `j = 1..=15`.
const BERNOULLI_OVER_FACT: [f64; 15] = [
    0.08333333333333333,
    -0.001388888888888889,
    3.306878306878307e-05,
    -8.267195767195768e-07,
    2.08767569878681e-08,
    -5.284190138687493e-10,
    1.3382536530684679e-11,
    -3.3896802963225827e-13,
    8.586062056277845e-15,
    -2.174868698558062e-16,
    5.5090028283602295e-18,
    -1.3954464685812522e-19,
    3.534707039629467e-21,
    -8.953517427037546e-23,
    2.267952452337683e-24,
];

/// Reference value of `L(s, chi_d)` from residue classes,
/// `L(s) = sum_a chi(a) sum_k (a + k d)^{-s}`, each class summed by
/// Euler–Maclaurin. The pole parts cancel because `sum_a chi(a) = 0`, so the
/// finite part is used and `s = 1` needs no special case.
pub fn euler_maclaurin_oracle(fd: &FundamentalDiscriminant, s: Complex64) -> Result<Complex64> {
    euler_maclaurin_oracle_capped(fd, s, ORACLE_CAP)
}

pub fn euler_maclaurin_oracle_capped(fd: &FundamentalDiscriminant, s: Complex64, cap: u64) -> Result<Complex64> {
    if fd.d > cap {
        return Err(Error::Resource(format!("oracle modulus {} exceeds cap {cap}", fd.d)));
    }
    LEngine::check_domain(s)?;
    let q = fd.d as f64;
    let big_n = (s.norm().ceil() as usize + 30).max(40);
    let one = Complex64::new(1.0, 0.0);
    let q_pow = (-s * q.ln()).exp();
    let mut total = Complex64::new(0.0, 0.0);
    for a in 1..fd.d {
        let c = fd.chi(a);
        if c == 0 {
            continue;
        }
        let af = a as f64;
        let mut head = Complex64::new(0.0, 0.0);
        for k in 0..big_n {
            head += (-s * (af + k as f64 * q).ln()).exp();
        }
        let alpha = af / q;
        let base = big_n as f64 + alpha;
        let lb = base.ln();
        let u = (one - s) * lb;
        let mut tail = -expm1_over(u) * lb;
        tail += (-s * lb).exp() * 0.5;
        let mut rising = s;
        let mut p = (-(s + 1.0) * lb).exp();
        let inv_sq = 1.0 / (base * base);
        for (j, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
            tail += rising * p * *b;
            let jj = (2 * j + 1) as f64;
            rising = rising * (s + jj) * (s + jj + 1.0);
            p *= inv_sq;
        }
        total += (head + q_pow * tail) * c as f64;
    }
    Ok(total)
}

/// Digamma at a real point, re-exported for callers combining `L` with
/// `Gamma`.
pub fn digamma(x: f64) -> f64 {
    special::digamma(Complex64::new(x, 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const L1_CHI8: f64 = 0.623_225_240_140_230_5;

    #[test]
    fn class_number_anchor() {
        let e = LEngine::for_d(8).unwrap();
        let v = e.l_value(c(1.0, 0.0)).unwrap();
        assert!((v.l.re - L1_CHI8).abs() < 1e-10, "{:?}", v);
        assert!(v.l.im.abs() < 1e-14);
        let fd = FundamentalDiscriminant::from_d(8).unwrap();
        let o = euler_maclaurin_oracle(&fd, c(1.0, 0.0)).unwrap();
        assert!((o.re - L1_CHI8).abs() < 1e-10, "{o}");
    }

    #[test]
    fn functional_equation_with_unequal_split() {
        let fd = FundamentalDiscriminant::from_d(8).unwrap();
        let e = LEngine::new(fd, EngineConfig { split: 1.2, ..Default::default() }).unwrap();
        for s in [c(0.7, 0.0), c(0.3, 2.0), c(1.1, -5.0)] {
            let a = e.completed_lambda(s).unwrap().lambda;
            let b = e.completed_lambda(c(1.0, 0.0) - s).unwrap().lambda;
            assert!((a - b).norm() <= 1e-10 * (1.0 + a.norm()), "s={s} {a} {b}");
        }
    }

    #[test]
    fn real_on_critical_line() {
        let e = LEngine::for_d(104).unwrap();
        let v = e.completed_lambda(c(0.5, 1.0)).unwrap();
        assert!(v.lambda.im.abs() < 1e-10 * (1.0 + v.lambda.norm()));
    }

    #[test]
    fn complex_step_matches_jet() {
        let e = LEngine::for_d(1032).unwrap();
        let r = e.l_prime(0.8).unwrap();
        let t = e.taylor::<2>(c(0.8, 0.0)).unwrap();
        assert!((r.l_prime - t.l.coeff(1).re).abs() < 1e-11 * (1.0 + r.l_prime.abs()));
        assert!((r.l - t.l.coeff(0).re).abs() < 1e-13);
        assert!(r.l_prime_err < 1e-10);
    }

    #[test]
    fn complex_step_matches_jet_across_region() {
        // Integer and half-integer gamma arguments used to trip the
        // incomplete-gamma routines.
        for d in [8u64, 1032] {
            let e = LEngine::for_d(d).unwrap();
            for i in 0..=68 {
                let sigma = (-0.9 + 0.05 * i as f64).min(RE_MAX);
                if sigma.abs() < 1e-9 {
                    continue;
                }
                let r = e.l_prime(sigma).unwrap();
                let t = e.taylor::<2>(c(sigma, 0.0)).unwrap();
                let tol = 1e-9 * (1.0 + t.l.coeff(1).norm());
                assert!((r.l_prime - t.l.coeff(1).re).abs() < tol, "d = {d}, sigma = {sigma}: {} vs {}", r.l_prime, t.l.coeff(1));
            }
        }
    }

    #[test]
    fn log_deriv_near_zero_is_refused() {
        // L(1/2 + i t) has zeros on the line; Lambda vanishes at the first one.
        let e = LEngine::for_d(8).unwrap();
        let mut lo = 0.5;
        let mut hi = 8.0;
        let z = |t: f64| e.completed_lambda(c(0.5, t)).unwrap().lambda.re;
        // scan for a sign change
        let mut t = 0.1;
        let mut prev = z(t);
        while t < 12.0 {
            let nt = t + 0.05;
            let v = z(nt);
            if v.signum() != prev.signum() {
                lo = t;
                hi = nt;
                break;
            }
            prev = v;
            t = nt;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if z(mid).signum() == z(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let err = e.log_deriv(c(0.5, lo)).unwrap_err();
        assert!(matches!(err, Error::NearZero { .. }), "{err}");
    }

    #[test]
    fn expansion_reproduces_direct_values() {
        let e = LEngine::for_d(1032).unwrap();
        let ex = e.expansion(c(0.8, 0.0), 0.4).unwrap();
        for s in [c(0.8, 0.0), c(0.5, 0.2), c(1.1, -0.25), c(0.75, 0.39)] {
            let direct = e.taylor::<3>(s).unwrap();
            let model = ex.lambda::<3>(s);
            let bound = ex.error_bound((s - ex.center).norm());
            assert!((direct.lambda.value() - model.value()).norm() <= bound + direct.lambda_err[0], "s={s}");
            assert!(bound < 1e-8 * (1.0 + direct.lambda.value().norm()));
            let (l, _) = ex.l::<3>(s);
            assert!((l.coeff(1) - direct.l.coeff(1)).norm() < 1e-7 * (1.0 + l.coeff(1).norm()));
            assert!((l.coeff(2) - direct.l.coeff(2)).norm() < 1e-6 * (1.0 + l.coeff(2).norm()));
        }
    }

    #[test]
    fn region_is_enforced() {
        let e = LEngine::for_d(8).unwrap();
        assert!(matches!(e.l_value(c(0.5, 61.0)), Err(Error::Domain(_))));
        assert!(matches!(e.l_value(c(3.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn budget_is_reported() {
        let fd = FundamentalDiscriminant::from_d(8 * 1001).unwrap();
        let err = LEngine::new(fd, EngineConfig { max_terms: 10, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::TruncationBudget { available: 10, .. }));
    }
}
