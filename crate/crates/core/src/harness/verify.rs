// SPDX-License-Identifier: Apache-2.0

//! Fast invariant suite behind the `verify` subcommand.

use crate::characters::{char_average, enumerate_family, FundamentalDiscriminant};
use crate::error::Result;
use crate::fekete::{fekete_real_zeros, fekete_real_zeros_of, mellin_identity_check, FeketePoly};
use crate::lfunc::{euler_maclaurin_oracle, EngineConfig, LEngine};
use crate::randmodel::{moment_rand, MomentBudget};
use crate::selberg::weight_continuity_residuals;
use crate::zeros::{build_cover, NuPolicy};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.into(), pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn functional_equation() -> Result<Check> {
    let fam = enumerate_family(1e4)?;
    let cfg = EngineConfig { split: 1.2, ..EngineConfig::default() };
    let mut worst = 0.0f64;
    for fd in fam.members.iter().step_by(fam.len() / 4).take(4) {
        let e = LEngine::new(fd.clone(), cfg)?;
        for s in [c(0.25, 0.0), c(0.6, 3.0), c(0.9, -7.5), c(1.25, 10.0)] {
            let a = e.completed_lambda(s)?.lambda;
            let b = e.completed_lambda(c(1.0, 0.0) - s)?.lambda;
            worst = worst.max((a - b).norm() / (1.0 + a.norm()));
        }
    }
    Ok(check("functional equation", worst <= 1e-10, format!("max relative residual {worst:.2e}")))
}

fn oracle() -> Result<Check> {
    let mut worst = 0.0f64;
    for d in [8u64, 104, 1032] {
        let fd = FundamentalDiscriminant::from_d(d)?;
        let e = LEngine::with_defaults(fd.clone())?;
        for s in [0.55, 0.85, 1.2] {
            let v = e.l_value(c(s, 0.0))?.l;
            worst = worst.max((v - euler_maclaurin_oracle(&fd, c(s, 0.0))?).norm());
        }
    }
    let l1 = LEngine::for_d(8)?.l_value(c(1.0, 0.0))?.l.re;
    let anchor = (1.0 + 2f64.sqrt()).ln() / 2f64.sqrt();
    let pass = worst <= 1e-8 && (l1 - anchor).abs() <= 1e-10;
    Ok(check("oracle agreement", pass, format!("max |AFE - Euler-Maclaurin| {worst:.2e}, L(1, chi_8) off by {:.2e}", (l1 - anchor).abs())))
}

fn derivative() -> Result<Check> {
    let mut worst = 0.0f64;
    let h = 1e-5;
    for d in [8u64, 1032, 40008] {
        let e = LEngine::for_d(d)?;
        for sigma in [0.6, 0.8, 1.1] {
            let cs = e.l_prime(sigma)?;
            if cs.l_prime.abs() <= 1e-3 {
                continue;
            }
            let fd = (e.l_value(c(sigma + h, 0.0))?.l.re - e.l_value(c(sigma - h, 0.0))?.l.re) / (2.0 * h);
            worst = worst.max((cs.l_prime - fd).abs() / cs.l_prime.abs());
        }
    }
    Ok(check("complex step vs central difference", worst <= 1e-6, format!("max relative difference {worst:.2e}")))
}

fn weights() -> Check {
    let worst = [10.0, 100.0, 1e4].iter().flat_map(|&y| weight_continuity_residuals(y)).fold(0.0f64, f64::max);
    check("weight continuity", worst <= 1e-12, format!("max residual {worst:.2e}"))
}

fn covers() -> Result<Check> {
    let mut ok = true;
    let mut detail = Vec::new();
    for x in [1e3, 1e5] {
        let cover = build_cover(x, NuPolicy::Auto.value(x))?;
        let first = cover.circles[0];
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-15;
        let anchor = first.j == 1 && close(first.center, 5.0 / 6.0) && close(first.radius, 1.0 / 6.0) && close(first.outer, 5.0 / 24.0);
        let covered = cover.verify_grid(10_001);
        ok &= anchor && covered;
        detail.push(format!("x = {x}: J = {}, covered {covered}, anchor {anchor}", cover.j()));
    }
    Ok(check("cover", ok, detail.join("; ")))
}

fn fekete() -> Result<Check> {
    let z8 = fekete_real_zeros(8, None, 1e-12)?;
    let z5 = fekete_real_zeros_of(&FeketePoly::from_kronecker(5)?, 80, 1e-12)?;
    let m = mellin_identity_check(8, 0.75)?;
    let pass = z8.count == 0 && z8.suspects.is_empty() && z5.count == 0 && z5.suspects.is_empty() && m.residual1 <= 1e-6 && m.residual2 <= 1e-5;
    Ok(check(
        "Fekete",
        pass,
        format!("zeros of F_8: {}, F_5: {}; Mellin residuals {:.2e}, {:.2e}", z8.count, z5.count, m.residual1, m.residual2),
    ))
}

fn orthogonality() -> Result<Check> {
    let fam = enumerate_family(1e4)?;
    let a9 = char_average(&fam, 9)?;
    let a3 = char_average(&fam, 3)?;
    let mut b = BTreeMap::new();
    b.insert(3u64, BigRational::from_integer(BigInt::from(1)));
    let m = moment_rand(&b, 3, 2, MomentBudget::default())?;
    let exact = m == BigRational::new(BigInt::from(3), BigInt::from(4));
    let pass = (a9 - 0.75).abs() <= 0.02 && a3.abs() <= 0.05 && exact;
    Ok(check("orthogonality", pass, format!("mean chi(9) = {a9:.4}, mean chi(3) = {a3:.4}, E[X(3)^2] = {m}")))
}

/// Run every check; an error inside a check is reported as a failure.
pub fn run_checks() -> Vec<Check> {
    let wrap = |name: &str, r: Result<Check>| r.unwrap_or_else(|e| check(name, false, format!("error: {e}")));
    vec![
        wrap("functional equation", functional_equation()),
        wrap("oracle agreement", oracle()),
        wrap("complex step vs central difference", derivative()),
        weights(),
        wrap("cover", covers()),
        wrap("Fekete", fekete()),
        wrap("orthogonality", orthogonality()),
    ]
}
