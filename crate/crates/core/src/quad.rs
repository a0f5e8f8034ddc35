// SPDX-License-Identifier: Apache-2.0

//! Double-exponential (exp-sinh) quadrature on `(0, inf)`.
//!
//! `v = exp((pi/2) sinh tau)` maps the real line onto `(0, inf)`; the
//! trapezoid rule in `tau` then converges doubly exponentially for integrands
//! that are analytic on `(0, inf)`, integrable at 0 and decaying at least
//! exponentially. Step halving reuses all earlier nodes.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Difference between the last two levels.
    pub err_est: f64,
    pub evals: usize,
    pub levels: usize,
}

const TAU_LO: f64 = -5.0;
const TAU_HI: f64 = 4.0;
const MAX_LEVELS: usize = 12;

/// `int_0^inf f(v) dv` to relative tolerance `rel_tol`.
pub fn exp_sinh(f: impl Fn(f64) -> f64, rel_tol: f64) -> Result<QuadResult> {
    let node = |tau: f64| -> f64 {
        let u = FRAC_PI_2 * tau.sinh();
        let v = u.exp();
        let w = FRAC_PI_2 * tau.cosh() * v;
        if v == 0.0 || !v.is_finite() || w == 0.0 {
            return 0.0;
        }
        f(v) * w
    };
    let mut h = 0.5;
    let n0 = ((TAU_HI - TAU_LO) / h).round() as usize;
    let mut sum: f64 = (0..=n0).map(|k| node(TAU_LO + k as f64 * h)).sum();
    let mut evals = n0 + 1;
    let mut prev = sum * h;
    for level in 1..=MAX_LEVELS {
        h *= 0.5;
        let n = ((TAU_HI - TAU_LO) / h).round() as usize;
        let fresh: f64 = (0..n / 2).map(|k| node(TAU_LO + (2 * k + 1) as f64 * h)).sum();
        evals += n / 2;
        sum += fresh;
        let cur = sum * h;
        if !cur.is_finite() {
            return Err(Error::Accuracy("integrand is not finite on the quadrature nodes".into()));
        }
        let err = (cur - prev).abs();
        if level >= 2 && err <= rel_tol * cur.abs() {
            return Ok(QuadResult { value: cur, err_est: err, evals, levels: level });
        }
        prev = cur;
    }
    Err(Error::Accuracy(format!("exp-sinh quadrature did not reach relative tolerance {rel_tol:.1e} (last difference {:.3e})", (sum * h - prev).abs())))
}
