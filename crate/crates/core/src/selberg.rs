// SPDX-License-Identifier: Apache-2.0

//! Selberg's smoothed Dirichlet polynomial for `-L'/L`.
//!
//! ```text
//! w_y(n) = 1                                              n <= y
//!        = (log^2(y^3/n) - 2 log^2(y^2/n)) / (2 log^2 y)   y <= n <= y^2
//!        = log^2(y^3/n) / (2 log^2 y)                      y^2 <= n <= y^3
//!        = 0                                              n > y^3
//! A_d(s) = sum_{n <= y^3} Lambda(n) chi_d(n) w_y(n) n^{-s}
//! ```
//!
//! `sigma_{y,d} = 1/2 + 2 max(beta - 1/2, 2/log y)`, the maximum taken over
//! zeros `beta + i gamma` with `beta > 1/2 + 2/log y` and
//! `|gamma - t| <= y^{3(beta - 1/2)}/log y`.

use crate::characters::FundamentalDiscriminant;
use crate::error::{Error, Result};
use crate::lfunc::LEngine;
use crate::primes::{von_mangoldt, PrimePowers};
use crate::zeros::{locate_in_rectangle, rectangle_zero_count};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default cap on `y^3`, the length of the polynomial.
pub const DEFAULT_LENGTH_BUDGET: f64 = 1e8;

/// The four branch formulas of `w_y` at `L = log n`, `ly = log y`.
fn weight_branch(branch: usize, ly: f64, l: f64) -> f64 {
    match branch {
        0 => 1.0,
        1 => {
            let a = 3.0 * ly - l;
            let b = 2.0 * ly - l;
            (a * a - 2.0 * b * b) / (2.0 * ly * ly)
        }
        2 => {
            let a = 3.0 * ly - l;
            a * a / (2.0 * ly * ly)
        }
        _ => 0.0,
    }
}

/// The weight `w_y(n)`, for real `n >= 1`.
pub fn weight(y: f64, n: f64) -> f64 {
    let ly = y.ln();
    let l = n.ln();
    let branch = if l <= ly {
        0
    } else if l <= 2.0 * ly {
        1
    } else if l <= 3.0 * ly {
        2
    } else {
        3
    };
    weight_branch(branch, ly, l)
}

/// Differences of adjacent branch formulas of `w_y` at the breakpoints
/// `n = y, y^2, y^3`.
pub fn weight_continuity_residuals(y: f64) -> [f64; 3] {
    let ly = y.ln();
    std::array::from_fn(|j| {
        let l = (j + 1) as f64 * ly;
        (weight_branch(j, ly, l) - weight_branch(j + 1, ly, l)).abs()
    })
}

/// `Lambda_{y,d}(n) = Lambda(n) chi_d(n) w_y(n)`.
pub fn lambda_y_d(fd: &FundamentalDiscriminant, y: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let c = fd.chi(n);
    if c == 0 {
        return 0.0;
    }
    let l = von_mangoldt(n);
    if l == 0.0 {
        return 0.0;
    }
    l * c as f64 * weight(y, n as f64)
}

/// Prime powers up to `y^3` with their weights. Built once per `y` and shared
/// by every discriminant.
#[derive(Clone, Debug)]
pub struct SelbergPoly {
    pub y: f64,
    /// `(n, Lambda(n) w_y(n), log n)` for prime powers `n <= y^3`.
    terms: Arc<[(u64, f64, f64)]>,
}

impl SelbergPoly {
    pub fn new(y: f64) -> Result<Self> {
        Self::with_budget(y, DEFAULT_LENGTH_BUDGET)
    }

    pub fn with_budget(y: f64, budget: f64) -> Result<Self> {
        if !(y > 1.0 && y.is_finite()) {
            return Err(Error::Domain(format!("y must exceed 1, got {y}")));
        }
        let len = y.powi(3);
        if len > budget {
            return Err(Error::Resource(format!("y^3 = {len:.3e} exceeds the summation budget {budget:.3e}")));
        }
        let limit = len.floor() as u64;
        let pp = PrimePowers::new(limit);
        let terms: Vec<(u64, f64, f64)> = pp
            .entries
            .iter()
            .map(|&(n, lp)| (n, lp * weight(y, n as f64), (n as f64).ln()))
            .filter(|t| t.1 != 0.0)
            .collect();
        Ok(SelbergPoly { y, terms: terms.into() })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `A_d(s)`.
    pub fn eval(&self, fd: &FundamentalDiscriminant, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(n, c, ln) in self.terms.iter() {
            let chi = fd.chi(n);
            if chi != 0 {
                acc += (-s * ln).exp() * (c * chi as f64);
            }
        }
        acc
    }
}

/// `A_d(s)` for a single discriminant. Builds the prime-power table; sweeps
/// should build a `SelbergPoly` once instead.
pub fn dirichlet_poly_a(fd: &FundamentalDiscriminant, y: f64, s: Complex64) -> Result<Complex64> {
    if y.powi(3) < 2.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(SelbergPoly::new(y)?.eval(fd, s))
}

/// Majorant of `sum_{n > y} Lambda(n)/n^sigma` for `sigma > 1`, by partial
/// summation against `psi(t) <= 1.04 t`.
pub fn dirichlet_tail_bound(y: f64, sigma: f64) -> f64 {
    assert!(sigma > 1.0);
    1.04 * sigma / (sigma - 1.0) * y.powf(1.0 - sigma) + y.ln() * y.powf(-sigma)
}

/// Rectangle counts and locations of zeros of `L`.
pub trait ZeroScanner {
    fn d(&self) -> u64;
    fn count_in(&self, re: [f64; 2], im: [f64; 2]) -> Result<u32>;
    fn locate_in(&self, re: [f64; 2], im: [f64; 2]) -> Result<Vec<Complex64>>;
}

impl ZeroScanner for LEngine {
    fn d(&self) -> u64 {
        LEngine::d(self)
    }

    fn count_in(&self, re: [f64; 2], im: [f64; 2]) -> Result<u32> {
        Ok(rectangle_zero_count(self, re, im)?.count)
    }

    fn locate_in(&self, re: [f64; 2], im: [f64; 2]) -> Result<Vec<Complex64>> {
        locate_in_rectangle(self, re, im, 1e-6)
    }
}

/// Default half-height of the certified rectangle around `t`.
pub const DEFAULT_HEIGHT_CAP: f64 = 1.0;
/// Right edge of the certified rectangle.
const RIGHT_EDGE: f64 = 1.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaYD {
    pub d: u64,
    pub y: f64,
    pub t: f64,
    pub value: f64,
    pub attained_by_default: bool,
    /// The zero set was examined for `|gamma - t|` up to this height.
    pub certified_height: f64,
    /// Zeros found in the examined part of the region.
    pub zeros: Vec<Complex64>,
}

/// `1/2 + 4/log y`.
pub fn default_sigma(y: f64) -> f64 {
    0.5 + 4.0 / y.ln()
}

/// `sigma_{y,d}` at ordinate `t`. The region is examined up to
/// `|gamma - t| <= min(height_cap, y^{3/2}/log y)` by a rectangle count of
/// zeros of `L` over `[1/2 + 2/log y, 5/4]`; if it is not zero free the zeros
/// are located and filtered by the region's shape. `y` enters only through
/// `log y`, so it may be far beyond the polynomial budget.
pub fn sigma_y_d(scanner: &impl ZeroScanner, y: f64, t: f64, height_cap: f64) -> Result<SigmaYD> {
    if !(y > 1.0) || !(height_cap > 0.0) {
        return Err(Error::Domain(format!("need y > 1 and a positive height cap, got y = {y}, cap = {height_cap}")));
    }
    let ly = y.ln();
    let beta0 = 0.5 + 2.0 / ly;
    let default = default_sigma(y);
    if beta0 >= RIGHT_EDGE {
        return Ok(SigmaYD { d: scanner.d(), y, t, value: default, attained_by_default: true, certified_height: height_cap, zeros: vec![] });
    }
    let reach = (1.5 * ly - ly.ln()).exp();
    let h = height_cap.min(reach);
    let re = [beta0, RIGHT_EDGE];
    let im = [t - h, t + h];
    let count = scanner.count_in(re, im).map_err(|e| indeterminate(scanner.d(), e))?;
    let mut zeros = Vec::new();
    let mut beta_max = f64::NEG_INFINITY;
    if count > 0 {
        zeros = scanner.locate_in(re, im).map_err(|e| indeterminate(scanner.d(), e))?;
        for z in &zeros {
            let reach = (3.0 * (z.re - 0.5) * ly).exp() / ly;
            if z.re > beta0 && (z.im - t).abs() <= reach {
                beta_max = beta_max.max(z.re);
            }
        }
    }
    let excess = (beta_max - 0.5).max(2.0 / ly);
    let attained_by_default = beta_max == f64::NEG_INFINITY;
    Ok(SigmaYD {
        d: scanner.d(),
        y,
        t,
        value: if attained_by_default { default } else { 0.5 + 2.0 * excess },
        attained_by_default,
        certified_height: h,
        zeros,
    })
}

fn indeterminate(d: u64, e: Error) -> Error {
    if e.is_indeterminate() {
        Error::Indeterminate(format!("sigma_(y,d) for d = {d}: {e}"))
    } else {
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub d: u64,
    pub y: f64,
    pub s: f64,
    pub sigma_y_d: f64,
    /// `-L'/L(s)`.
    pub l_cal: f64,
    pub a: f64,
    pub diff: f64,
    /// `y^{(1/2 - s)/2} (|A_d(sigma_{y,d} + it)| + log d)`.
    pub envelope: f64,
    pub ratio: f64,
}

/// Compare `-L'/L(s)` with `A_d(s)` on the real axis against the error
/// envelope of the approximation.
pub fn approx_check(engine: &LEngine, poly: &SelbergPoly, sigma: &SigmaYD, s: f64) -> Result<ApproxReport> {
    if s < sigma.value - 1e-12 {
        return Err(Error::Domain(format!("s = {s} is below sigma_(y,d) = {}", sigma.value)));
    }
    if (poly.y - sigma.y).abs() > 1e-9 * sigma.y {
        return Err(Error::Domain(format!("polynomial built for y = {} but sigma for y = {}", poly.y, sigma.y)));
    }
    let fd = engine.discriminant();
    let l_cal = engine.log_deriv(Complex64::new(s, 0.0))?.value.re;
    let a = poly.eval(fd, Complex64::new(s, 0.0)).re;
    let a_sigma = poly.eval(fd, Complex64::new(sigma.value, sigma.t)).norm();
    let envelope = poly.y.powf((0.5 - s) / 2.0) * (a_sigma + (engine.d() as f64).ln());
    let diff = (l_cal - a).abs();
    Ok(ApproxReport { d: engine.d(), y: poly.y, s, sigma_y_d: sigma.value, l_cal, a, diff, envelope, ratio: diff / envelope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_branches() {
        for y in [10.0f64, 100.0, 1e4] {
            assert_eq!(weight(y, 1.0), 1.0);
            assert_eq!(weight(y, y), 1.0);
            assert!((weight(y, y * y) - 0.5).abs() < 1e-12);
            assert!(weight(y, y.powi(3)).abs() < 1e-12);
            assert_eq!(weight(y, y.powi(3) * 1.01), 0.0);
            assert!(weight_continuity_residuals(y).iter().all(|r| *r <= 1e-12), "y = {y}");
        }
    }

    #[test]
    fn lambda_examples() {
        let fd = FundamentalDiscriminant::from_d(8).unwrap();
        assert_eq!(lambda_y_d(&fd, 10.0, 6), 0.0);
        assert_eq!(lambda_y_d(&fd, 10.0, 2), 0.0);
        assert!((lambda_y_d(&fd, 10.0, 3) + 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn poly_matches_log_derivative_at_two() {
        let fd = FundamentalDiscriminant::from_d(8).unwrap();
        let e = LEngine::for_d(8).unwrap();
        let y = 400.0;
        let a = dirichlet_poly_a(&fd, y, Complex64::new(2.0, 0.0)).unwrap();
        let l = e.log_deriv(Complex64::new(2.0, 0.0)).unwrap().value;
        assert!(a.im == 0.0);
        let bound = 2.0 * (y.ln() + 1.0) / y;
        assert!((a - l).norm() <= bound, "{} vs {}", (a - l).norm(), bound);
        assert!((a - l).norm() <= dirichlet_tail_bound(y, 2.0));
    }

    #[test]
    fn degenerate_and_budget() {
        let fd = FundamentalDiscriminant::from_d(8).unwrap();
        assert_eq!(dirichlet_poly_a(&fd, 1.2, Complex64::new(2.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(SelbergPoly::new(1e4), Err(Error::Resource(_))));
    }

    #[test]
    fn sigma_default_for_8() {
        let e = LEngine::for_d(8).unwrap();
        for y in [100.0, 1e6, 1e20] {
            let s = sigma_y_d(&e, y, 0.0, DEFAULT_HEIGHT_CAP).unwrap();
            assert!(s.attained_by_default);
            assert_eq!(s.value, default_sigma(y));
        }
    }

    struct FakeScanner(Vec<Complex64>);

    impl ZeroScanner for FakeScanner {
        fn d(&self) -> u64 {
            0
        }
        fn count_in(&self, re: [f64; 2], im: [f64; 2]) -> Result<u32> {
            Ok(self.locate_in(re, im)?.len() as u32)
        }
        fn locate_in(&self, re: [f64; 2], im: [f64; 2]) -> Result<Vec<Complex64>> {
            Ok(self.0.iter().copied().filter(|z| z.re > re[0] && z.re < re[1] && z.im > im[0] && z.im < im[1]).collect())
        }
    }

    #[test]
    fn sigma_from_an_intruding_zero() {
        let y = 1e6;
        let z = Complex64::new(0.8, 0.1);
        let s = sigma_y_d(&FakeScanner(vec![z, z.conj()]), y, 0.0, 1.0).unwrap();
        assert!(!s.attained_by_default);
        assert!((s.value - (0.5 + 2.0 * 0.3)).abs() < 1e-15);
        assert!(s.value > default_sigma(y));
    }

    proptest! {
        #[test]
        fn weight_in_unit_interval(y in 10.0f64..1e5, e in 0.0f64..4.0) {
            let w = weight(y, y.powf(e));
            prop_assert!((0.0..=1.0).contains(&w));
        }

        #[test]
        fn weight_nonincreasing(y in 10.0f64..1e5, a in 1.0f64..3.2, b in 0.0f64..0.5) {
            prop_assert!(weight(y, y.powf(a + b)) <= weight(y, y.powf(a)) + 1e-15);
        }

        #[test]
        fn poly_conjugate_symmetric(m in 1u64..200, re in 0.6f64..2.0, im in -5.0f64..5.0) {
            let m = 2 * m + 1;
            prop_assume!(crate::primes::is_squarefree(m));
            let fd = FundamentalDiscriminant::from_m(m).unwrap();
            let p = SelbergPoly::new(20.0).unwrap();
            let s = Complex64::new(re, im);
            prop_assert!((p.eval(&fd, s.conj()) - p.eval(&fd, s).conj()).norm() < 1e-12);
        }
    }
}
