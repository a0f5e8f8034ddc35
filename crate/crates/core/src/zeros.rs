// SPDX-License-Identifier: Apache-2.0

//! Counting and locating zeros of `Lambda`, `L` and `L'`.
//!
//! Real zeros of `L'` come from sign changes on a grid followed by bisection.
//! A cell where `L'` gets small without changing sign is subdivided, and if it
//! is still ambiguous the cell goes to a contour count on a small disc.
//! Complex counts use the argument principle in two forms: the trapezoid rule
//! for `(1/2 pi i) \oint f'/f` on a circle, and continuous tracking of
//! `arg Lambda` along the sides of a rectangle.
//!
//! Every "no zeros here" statement is backed by one of these counts. Anything
//! that cannot be decided is returned as an error or flagged as a suspect.

use crate::error::{Error, RangePolicy, Result};
use crate::lfunc::{LEngine, LambdaExpansion, RE_MAX, RE_MIN, IM_MAX};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Value and derivative of an analytic function with error estimates.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub f: Complex64,
    pub df: Complex64,
    pub f_err: f64,
    pub df_err: f64,
}

pub trait Analytic {
    fn sample(&self, s: Complex64) -> Result<Sample>;
}

impl<F> Analytic for F
where
    F: Fn(Complex64) -> Result<Sample>,
{
    fn sample(&self, s: Complex64) -> Result<Sample> {
        self(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lambda,
    L,
    LPrime,
}

/// `Lambda`, `L` or `L'` evaluated through a disc expansion of `Lambda`.
pub struct ModelFunction<'a> {
    pub expansion: &'a LambdaExpansion,
    pub target: Target,
}

impl Analytic for ModelFunction<'_> {
    fn sample(&self, s: Complex64) -> Result<Sample> {
        let exp = self.expansion;
        let out = match self.target {
            Target::Lambda => {
                let j = exp.lambda::<2>(s);
                let e = exp.coeff_error::<2>((s - exp.center).norm());
                Sample { f: j.coeff(0), df: j.coeff(1), f_err: e[0], df_err: e[1] }
            }
            Target::L => {
                let (j, e) = exp.l::<2>(s);
                Sample { f: j.coeff(0), df: j.coeff(1), f_err: e[0], df_err: e[1] }
            }
            Target::LPrime => {
                let (j, e) = exp.l::<3>(s);
                Sample { f: j.coeff(1), df: j.coeff(2) * 2.0, f_err: e[1], df_err: 2.0 * e[2] }
            }
        };
        if !(out.f.re.is_finite() && out.f.im.is_finite() && out.df.re.is_finite() && out.df.im.is_finite()) {
            return Err(Error::Conditioning(format!("model evaluation at {s} is not finite")));
        }
        Ok(out)
    }
}

pub const START_NODES: usize = 256;
pub const MAX_NODES: usize = 1 << 14;
/// Samples must exceed this multiple of their error estimate.
pub const PROXIMITY_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourCount {
    pub center: Complex64,
    pub radius: f64,
    pub count: u32,
    /// Trapezoid value of `(1/2 pi i) \oint f'/f` at the accepted node count.
    pub integral: Complex64,
    /// The same integral with 512 nodes.
    pub integral_512: Complex64,
    pub nodes: usize,
    /// Smallest `|f|` seen on the contour, and the error-derived margin it had to beat.
    pub min_abs: f64,
    pub margin: f64,
}

struct CircleSamples {
    /// `f'/f (s - c)` at the nodes, in angular order.
    terms: Vec<Complex64>,
    min_abs: f64,
    margin: f64,
}

fn circle_terms(f: &impl Analytic, center: Complex64, radius: f64, nodes: usize, prev: Option<&CircleSamples>) -> Result<CircleSamples> {
    let mut terms = Vec::with_capacity(nodes);
    let mut min_abs = prev.map_or(f64::INFINITY, |p| p.min_abs);
    let mut margin = prev.map_or(0.0, |p| p.margin);
    for j in 0..nodes {
        if let Some(p) = prev {
            if j % 2 == 0 {
                terms.push(p.terms[j / 2]);
                continue;
            }
        }
        let w = Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
        let smp = f.sample(center + w)?;
        let a = smp.f.norm();
        let m = PROXIMITY_FACTOR * smp.f_err;
        if a < min_abs {
            min_abs = a;
        }
        margin = margin.max(m);
        if !(a > m) {
            return Err(Error::ContourProximity { min_abs: a, margin: m });
        }
        terms.push(smp.df / smp.f * w);
    }
    Ok(CircleSamples { terms, min_abs, margin })
}

fn mean(v: &[Complex64]) -> Complex64 {
    v.iter().sum::<Complex64>() / v.len() as f64
}

/// Number of zeros of `f` inside `|s - center| < radius`, by the trapezoid
/// rule for the argument principle. Nodes double from 256 until two successive
/// values agree and sit within 0.1 of the same integer.
pub fn circle_zero_count(f: &impl Analytic, center: Complex64, radius: f64) -> Result<ContourCount> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("contour radius must be positive, got {radius}")));
    }
    let mut nodes = START_NODES;
    let mut cur = circle_terms(f, center, radius, nodes, None)?;
    let mut value = mean(&cur.terms);
    let mut integral_512 = None;
    loop {
        let next_nodes = 2 * nodes;
        let next = circle_terms(f, center, radius, next_nodes, Some(&cur))?;
        let next_value = mean(&next.terms);
        if next_nodes == 512 {
            integral_512 = Some(next_value);
        }
        let k = next_value.re.round();
        let settled = (next_value - value).norm() < 1e-3 && (next_value.re - k).abs() < 0.1 && next_value.im.abs() < 0.1;
        nodes = next_nodes;
        cur = next;
        value = next_value;
        if settled && k >= 0.0 {
            return Ok(ContourCount {
                center,
                radius,
                count: k as u32,
                integral: value,
                integral_512: integral_512.unwrap_or(value),
                nodes,
                min_abs: cur.min_abs,
                margin: cur.margin,
            });
        }
        if nodes >= MAX_NODES {
            return Err(Error::Accuracy(format!(
                "contour integral around {center} (radius {radius}) did not settle on an integer: {value} at {nodes} nodes"
            )));
        }
    }
}

/// Zero count of `Lambda`, `L` or `L'` inside a circle, through a disc
/// expansion of `Lambda` of the same radius.
pub fn contour_zero_count(engine: &LEngine, center: Complex64, radius: f64, target: Target) -> Result<ContourCount> {
    let exp = engine.expansion(center, radius)?;
    circle_zero_count(&ModelFunction { expansion: &exp, target }, center, radius)
}

/// Locations of the `count` zeros inside a circle, from the power sums
/// `(1/2 pi i) \oint (s - c)^k f'/f ds` and Newton polishing on `f`.
pub fn locate_in_circle(f: &impl Analytic, center: Complex64, radius: f64, count: u32) -> Result<Vec<Complex64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = count as usize;
    let nodes = MAX_NODES.min(START_NODES * 4 * n);
    let mut sums = vec![Complex64::new(0.0, 0.0); n + 1];
    for j in 0..nodes {
        let w = Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
        let smp = f.sample(center + w)?;
        let base = smp.df / smp.f * w / nodes as f64;
        let mut wk = Complex64::new(1.0, 0.0);
        for s in sums.iter_mut().skip(1) {
            wk *= w;
            *s += base * wk;
        }
    }
    // Newton's identities give the elementary symmetric functions.
    let mut e = vec![Complex64::new(1.0, 0.0); n + 1];
    for k in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[k - i] * sums[i] * sign;
        }
        e[k] = acc / k as f64;
    }
    // Monic polynomial with those roots, highest degree first.
    let poly: Vec<Complex64> = (0..=n).map(|k| if k % 2 == 0 { e[k] } else { -e[k] }).collect();
    let roots = polynomial_roots(&poly);
    let mut out = Vec::with_capacity(n);
    for r in roots {
        let mut z = center + r;
        for _ in 0..30 {
            let smp = f.sample(z)?;
            if smp.df.norm() == 0.0 {
                break;
            }
            let step = smp.f / smp.df;
            z -= step;
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        // Polishing can jump to a neighbouring zero; fall back to the moment estimate.
        if (z - center).norm() > radius {
            z = center + r;
        }
        out.push(z);
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Roots of a monic polynomial given highest degree first, by Durand–Kerner.
fn polynomial_roots(poly: &[Complex64]) -> Vec<Complex64> {
    let n = poly.len() - 1;
    let eval = |z: Complex64| poly.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    let scale = 1.0 + poly.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * scale).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 * scale {
            break;
        }
    }
    z
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleCount {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub count: u32,
    /// Total change of `arg Lambda` around the boundary divided by `2 pi`.
    pub winding: f64,
    pub evaluations: usize,
}

const MIN_STEP: f64 = 1e-11;
const MAX_TURN: f64 = 0.6;

/// Change of `arg f` along the segment from `a` to `b`, with adaptive steps.
fn track_segment(f: &dyn Fn(Complex64) -> Result<(Complex64, f64)>, a: Complex64, b: Complex64, evals: &mut usize) -> Result<f64> {
    let len = (b - a).norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let check = |v: Complex64, e: f64| -> Result<()> {
        let m = PROXIMITY_FACTOR * e;
        if v.norm() > m {
            Ok(())
        } else {
            Err(Error::ContourProximity { min_abs: v.norm(), margin: m })
        }
    };
    let (mut fa, ea) = f(a)?;
    *evals += 1;
    check(fa, ea)?;
    let mut u = 0.0;
    let mut h = (0.05 / len).min(1.0);
    let mut total = 0.0;
    while u < 1.0 {
        let step = h.min(1.0 - u);
        let pm = a + (b - a) * (u + 0.5 * step);
        let pb = if u + step >= 1.0 { b } else { a + (b - a) * (u + step) };
        let (fm, em) = f(pm)?;
        let (fb, eb) = f(pb)?;
        *evals += 2;
        let ok = fm.norm() > PROXIMITY_FACTOR * em && fb.norm() > PROXIMITY_FACTOR * eb;
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        let d = (fb / fa).arg();
        if ok && d1.abs() < MAX_TURN && d2.abs() < MAX_TURN && (d1 + d2 - d).abs() < 1e-9 {
            total += d1 + d2;
            u += step;
            fa = fb;
            h = 2.0 * step;
        } else {
            h = 0.5 * step;
            if h * len < MIN_STEP {
                if !ok {
                    check(fm, em)?;
                    check(fb, eb)?;
                }
                return Err(Error::Accuracy(format!("argument tracking stalled between {a} and {b}")));
            }
        }
    }
    Ok(total)
}

/// Argument-principle count for a rectangle, given a value-and-error oracle.
/// With `conj_symmetric` set and a rectangle symmetric about the real axis
/// only the upper half of the boundary is walked.
pub fn rectangle_count_with(
    f: &dyn Fn(Complex64) -> Result<(Complex64, f64)>,
    re: [f64; 2],
    im: [f64; 2],
    conj_symmetric: bool,
) -> Result<RectangleCount> {
    if !(re[0] < re[1] && im[0] < im[1]) {
        return Err(Error::Domain(format!("degenerate rectangle {re:?} x {im:?}")));
    }
    let c = |x: f64, y: f64| Complex64::new(x, y);
    let mut evals = 0;
    let turn = if conj_symmetric && im[0] == -im[1] {
        let h = im[1];
        let half = track_segment(f, c(re[1], 0.0), c(re[1], h), &mut evals)?
            + track_segment(f, c(re[1], h), c(re[0], h), &mut evals)?
            + track_segment(f, c(re[0], h), c(re[0], 0.0), &mut evals)?;
        2.0 * half
    } else {
        track_segment(f, c(re[0], im[0]), c(re[1], im[0]), &mut evals)?
            + track_segment(f, c(re[1], im[0]), c(re[1], im[1]), &mut evals)?
            + track_segment(f, c(re[1], im[1]), c(re[0], im[1]), &mut evals)?
            + track_segment(f, c(re[0], im[1]), c(re[0], im[0]), &mut evals)?
    };
    let winding = turn / (2.0 * PI);
    let k = winding.round();
    if (winding - k).abs() > 0.1 || k < 0.0 {
        return Err(Error::Accuracy(format!("rectangle winding {winding} is not a nonnegative integer")));
    }
    Ok(RectangleCount { re, im, count: k as u32, winding, evaluations: evals })
}

fn check_rectangle(re: [f64; 2], im: [f64; 2]) -> Result<()> {
    if re[0] < RE_MIN || re[1] > RE_MAX || im[0].abs().max(im[1].abs()) > IM_MAX {
        return Err(Error::Domain(format!("rectangle {re:?} x {im:?} leaves the evaluation region")));
    }
    Ok(())
}

/// Zeros of `L` (equivalently `Lambda`) inside a rectangle with `Re s > 0`.
pub fn rectangle_zero_count(engine: &LEngine, re: [f64; 2], im: [f64; 2]) -> Result<RectangleCount> {
    check_rectangle(re, im)?;
    if re[0] <= 0.0 {
        return Err(Error::Domain("rectangle must lie in Re s > 0, where Lambda and L share zeros".into()));
    }
    let f = |s: Complex64| engine.lambda_raw(s);
    rectangle_count_with(&f, re, im, true)
}

/// Locate the zeros of `Lambda` in a rectangle by repeated bisection of the
/// rectangle, finishing with Newton steps once a box is smaller than `tol`.
pub fn locate_in_rectangle(engine: &LEngine, re: [f64; 2], im: [f64; 2], tol: f64) -> Result<Vec<Complex64>> {
    let top = rectangle_zero_count(engine, re, im)?;
    let mut out = Vec::new();
    locate_rec(engine, re, im, top.count, tol.max(1e-9), &mut out)?;
    out.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(out)
}

fn locate_rec(engine: &LEngine, re: [f64; 2], im: [f64; 2], count: u32, tol: f64, out: &mut Vec<Complex64>) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let w = re[1] - re[0];
    let h = im[1] - im[0];
    if w.max(h) < tol {
        let mut z = Complex64::new(0.5 * (re[0] + re[1]), 0.5 * (im[0] + im[1]));
        for _ in 0..20 {
            let t = engine.taylor_raw::<2>(z)?;
            let step = t.lambda.coeff(0) / t.lambda.coeff(1);
            if !step.re.is_finite() {
                break;
            }
            z -= step;
            if step.norm() < 1e-14 {
                break;
            }
        }
        for _ in 0..count {
            out.push(z);
        }
        return Ok(());
    }
    let f = |s: Complex64| engine.lambda_raw(s);
    for frac in [0.5, 0.47, 0.53, 0.41] {
        let halves = if w >= h {
            let m = re[0] + frac * w;
            [([re[0], m], im), ([m, re[1]], im)]
        } else {
            let m = im[0] + frac * h;
            [(re, [im[0], m]), (re, [m, im[1]])]
        };
        let first = rectangle_count_with(&f, halves[0].0, halves[0].1, false);
        let second = rectangle_count_with(&f, halves[1].0, halves[1].1, false);
        if let (Ok(a), Ok(b)) = (first, second) {
            if a.count + b.count == count {
                locate_rec(engine, halves[0].0, halves[0].1, a.count, tol, out)?;
                locate_rec(engine, halves[1].0, halves[1].1, b.count, tol, out)?;
                return Ok(());
            }
        }
    }
    Err(Error::Indeterminate(format!("could not split rectangle {re:?} x {im:?} holding {count} zeros")))
}

/// `V_z = 1/(Re z - 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VNorm {
    pub z: Complex64,
    pub v: f64,
}

impl VNorm {
    pub fn new(z: Complex64) -> Result<Self> {
        if !(z.re > 0.5) {
            return Err(Error::Domain(format!("V_z needs Re z > 1/2, got {z}")));
        }
        Ok(VNorm { z, v: 1.0 / (z.re - 0.5) })
    }
}

/// Choice of `nu(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuPolicy {
    /// `log log x`.
    Auto,
    /// `(log log x)^{1/5}`, the largest value the disc hypothesis allows.
    Hyp,
    Explicit(f64),
}

impl NuPolicy {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            NuPolicy::Auto => x.ln().ln(),
            NuPolicy::Hyp => x.ln().ln().powf(0.2),
            NuPolicy::Explicit(v) => v,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "auto" => Ok(NuPolicy::Auto),
            "hyp" => Ok(NuPolicy::Hyp),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .map(NuPolicy::Explicit)
                .ok_or_else(|| Error::Usage(format!("nu must be auto, hyp or a positive number, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for NuPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NuPolicy::Auto => write!(f, "auto"),
            NuPolicy::Hyp => write!(f, "hyp"),
            NuPolicy::Explicit(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCircle {
    pub j: u32,
    pub center: f64,
    pub radius: f64,
    /// `(5/4) r_j`, where the maximum modulus is taken.
    pub outer: f64,
}

impl CoverCircle {
    pub fn new(j: u32) -> Self {
        let p = 3f64.powi(j as i32);
        CoverCircle { j, center: 0.5 + 1.0 / p, radius: 0.5 / p, outer: 1.25 * 0.5 / p }
    }
}

/// Circles `|z - z_j| <= r_j`, `z_j = 1/2 + 3^{-j}`, `r_j = 1/(2 3^j)`,
/// covering `[1/2 + nu/log x, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleCover {
    pub x: f64,
    pub nu: f64,
    /// The requested `nu` exceeded `log log x` and was reduced to it.
    pub nu_clamped: bool,
    /// `floor((log log x - log nu)/log 3)`.
    pub j_formula: u32,
    /// Circles added beyond `j_formula` to reach the left end of the interval.
    pub extended: u32,
    pub circles: Vec<CoverCircle>,
    pub interval: [f64; 2],
}

impl CircleCover {
    /// Whether `t` lies in one of the closed discs. A relative slack of a few
    /// ulps absorbs rounding at the points where neighbouring discs touch.
    pub fn covers(&self, t: f64) -> bool {
        self.circles.iter().any(|c| (t - c.center).abs() <= c.radius * (1.0 + 4.0 * f64::EPSILON) + 4.0 * f64::EPSILON)
    }

    /// Check coverage of the interval on a uniform grid of `points` points.
    pub fn verify_grid(&self, points: usize) -> bool {
        let [lo, hi] = self.interval;
        (0..points).all(|i| {
            let t = lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64;
            self.covers(t)
        })
    }

    pub fn j(&self) -> u32 {
        self.circles.len() as u32
    }
}

pub fn build_cover(x: f64, nu: f64) -> Result<CircleCover> {
    if !(x > std::f64::consts::E.exp()) {
        return Err(Error::Domain(format!("cover needs log log x > 1, got x = {x}")));
    }
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    let ll = x.ln().ln();
    let (nu, nu_clamped) = if nu > ll { (ll, true) } else { (nu, false) };
    let j_formula = ((ll - nu.ln()) / 3f64.ln()).floor().max(0.0) as u32;
    let lo = 0.5 + nu / x.ln();
    // The union of the first J discs is [1/2 + 1/(2 3^J), 1].
    let mut j = j_formula.max(1);
    while 0.5 + 0.5 / 3f64.powi(j as i32) > lo {
        j += 1;
    }
    let circles = (1..=j).map(CoverCircle::new).collect();
    Ok(CircleCover { x, nu, nu_clamped, j_formula, extended: j - j_formula, circles, interval: [lo, 1.0] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub j: u32,
    /// `log(M / |cal L(z_j)|) / log(5/4)`.
    pub bound: f64,
    /// Maximum of `|L'/L|` over the sampled circle of radius `(5/4) r_j`.
    pub m_max: f64,
    pub abs_center: f64,
    pub m_over_v: f64,
    pub center_over_v: f64,
    /// Zeros of `L` inside the `(7/4) r_j` disc; zero when the bound applies.
    pub l_zeros: u32,
}

pub const JENSEN_SAMPLES: usize = 512;

fn jensen_from(engine: &LEngine, exp: &LambdaExpansion, circle: &CoverCircle) -> Result<JensenReport> {
    let center = Complex64::new(circle.center, 0.0);
    let l_count = circle_zero_count(&ModelFunction { expansion: exp, target: Target::Lambda }, center, 1.75 * circle.radius)?;
    if l_count.count > 0 {
        return Err(Error::Indeterminate(format!(
            "L has {} zero(s) within (7/4) r_{} of z_{}, -L'/L is not analytic there",
            l_count.count, circle.j, circle.j
        )));
    }
    let mut m_max: f64 = 0.0;
    for k in 0..JENSEN_SAMPLES {
        let s = center + Complex64::from_polar(circle.outer, 2.0 * PI * k as f64 / JENSEN_SAMPLES as f64);
        let (l, _) = exp.l::<2>(s);
        m_max = m_max.max((l.coeff(1) / l.coeff(0)).norm());
    }
    let ld = engine.log_deriv(center)?;
    let abs_center = ld.value.norm();
    if !(abs_center > 3.0 * ld.err_est && abs_center > engine.config().floor) {
        return Err(Error::NearZero { abs_l: abs_center, floor: (3.0 * ld.err_est).max(engine.config().floor) });
    }
    let v = 1.0 / (circle.center - 0.5);
    Ok(JensenReport {
        j: circle.j,
        bound: (m_max / abs_center).ln() / 1.25f64.ln(),
        m_max,
        abs_center,
        m_over_v: m_max / v,
        center_over_v: abs_center / v,
        l_zeros: 0,
    })
}

fn cover_expansion(engine: &LEngine, circle: &CoverCircle) -> Result<LambdaExpansion> {
    engine.expansion(Complex64::new(circle.center, 0.0), 1.75 * circle.radius)
}

/// Jensen bound for the number of zeros of `-L'/L` in the `j`-th disc.
pub fn jensen_upper_bound(engine: &LEngine, cover: &CircleCover, j: u32) -> Result<JensenReport> {
    let circle = cover
        .circles
        .iter()
        .find(|c| c.j == j)
        .ok_or_else(|| Error::Domain(format!("cover has no circle {j}")))?;
    let exp = cover_expansion(engine, circle)?;
    jensen_from(engine, &exp, circle)
}

/// Jensen bound, contour count of `L'` and real-axis count on the chord of
/// one covering circle, sharing a single expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleCheck {
    pub d: u64,
    pub j: u32,
    pub jensen: JensenReport,
    pub lprime: ContourCount,
    pub chord: ZeroRecord,
}

impl CircleCheck {
    pub fn consistent(&self) -> bool {
        self.jensen.bound >= self.lprime.count as f64 && self.lprime.count >= self.chord.count
    }
}

pub fn check_cover_circle(engine: &LEngine, circle: &CoverCircle, scan: &RealScan) -> Result<CircleCheck> {
    let exp = cover_expansion(engine, circle)?;
    let jensen = jensen_from(engine, &exp, circle)?;
    let center = Complex64::new(circle.center, 0.0);
    let lprime = circle_zero_count(&ModelFunction { expansion: &exp, target: Target::LPrime }, center, circle.radius)?;
    let lo = circle.center - circle.radius;
    let hi = (circle.center + circle.radius).min(1.0);
    let chord = count_real_zeros(engine, lo, hi, scan.grid_step.min((hi - lo) / 8.0), scan.refine_tol)?;
    Ok(CircleCheck { d: engine.d(), j: circle.j, jensen, lprime, chord })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealScan {
    pub grid_step: f64,
    pub refine_tol: f64,
}

impl Default for RealScan {
    fn default() -> Self {
        RealScan { grid_step: 0.01, refine_tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    GridBisection,
    /// Some cells were settled by a contour count.
    Contour,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCertificate {
    pub loc: f64,
    pub halfwidth: f64,
    /// `|L(loc)|` is also below the floor: a multiple zero of `L`.
    pub l_small: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suspect {
    pub lo: f64,
    pub hi: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub d: u64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub count: u32,
    pub zeros: Vec<ZeroCertificate>,
    pub suspects: Vec<Suspect>,
    pub method: CountMethod,
}

impl ZeroRecord {
    /// With suspects present the count is only a lower bound.
    pub fn is_exact(&self) -> bool {
        self.suspects.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
struct GridPoint {
    s: f64,
    f: f64,
    f_err: f64,
    df: f64,
}

impl GridPoint {
    fn certified(&self) -> bool {
        self.f.abs() > 3.0 * self.f_err
    }
}

fn grid_point(engine: &LEngine, s: f64) -> Result<GridPoint> {
    let t = engine.taylor::<3>(Complex64::new(s, 0.0))?;
    Ok(GridPoint { s, f: t.l.coeff(1).re, f_err: t.l_err[1], df: 2.0 * t.l.coeff(2).re })
}

struct Scanner<'a> {
    engine: &'a LEngine,
    refine_tol: f64,
    min_cell: f64,
    zeros: Vec<ZeroCertificate>,
    suspects: Vec<Suspect>,
    contour_used: bool,
}

impl Scanner<'_> {
    fn bisect(&mut self, a: f64, b: f64) -> Result<()> {
        let eval = |s: f64| -> Result<(f64, bool)> {
            let r = self.engine.l_prime(s)?;
            Ok((r.l_prime, r.l_prime.abs() > 3.0 * r.l_prime_err))
        };
        let (fa, ca) = eval(a)?;
        let (fb, cb) = eval(b)?;
        if !(ca && cb && fa.signum() != fb.signum()) {
            return self.escalate(a, b, "sign change not confirmed by complex-step values");
        }
        let (mut lo, mut hi, mut flo) = (a, b, fa);
        'outer: while hi - lo > 2.0 * self.refine_tol {
            for frac in [0.5, 0.4, 0.6] {
                let m = lo + frac * (hi - lo);
                let (fm, cm) = eval(m)?;
                if cm {
                    if fm.signum() == flo.signum() {
                        lo = m;
                        flo = fm;
                    } else {
                        hi = m;
                    }
                    continue 'outer;
                }
            }
            break;
        }
        let loc = 0.5 * (lo + hi);
        let r = self.engine.l_prime(loc)?;
        let floor = self.engine.config().floor.max(3.0 * r.l_err);
        self.zeros.push(ZeroCertificate { loc, halfwidth: 0.5 * (hi - lo), l_small: r.l.abs() <= floor });
        Ok(())
    }

    fn escalate(&mut self, a: f64, b: f64, why: &str) -> Result<()> {
        let mid = 0.5 * (a + b);
        let radius = (b - a).max(1e-3);
        self.contour_used = true;
        match contour_zero_count(self.engine, Complex64::new(mid, 0.0), radius, Target::LPrime) {
            Ok(c) if c.count == 0 => Ok(()),
            Ok(c) => {
                self.suspects.push(Suspect { lo: a, hi: b, reason: format!("{why}; disc of radius {radius:.1e} holds {} zero(s) of L'", c.count) });
                Ok(())
            }
            Err(e) if e.is_indeterminate() || matches!(e, Error::Domain(_)) => {
                self.suspects.push(Suspect { lo: a, hi: b, reason: format!("{why}; contour check failed: {e}") });
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Cell between two certified points of equal sign.
    fn single_sign(&mut self, a: GridPoint, b: GridPoint) -> Result<()> {
        let h = b.s - a.s;
        let lip = a.df.abs().max(b.df.abs()) + (a.df - b.df).abs();
        let slack = a.f.abs() + b.f.abs() - 3.0 * (a.f_err + b.f_err);
        if slack > lip * h {
            return Ok(());
        }
        if h <= self.min_cell {
            return self.escalate(a.s, b.s, "L' small without a sign change");
        }
        let m = grid_point(self.engine, 0.5 * (a.s + b.s))?;
        if !m.certified() {
            return self.escalate(a.s, b.s, "L' below its error estimate without a sign change");
        }
        for (p, q) in [(a, m), (m, b)] {
            if p.f.signum() == q.f.signum() {
                self.single_sign(p, q)?;
            } else {
                self.bisect(p.s, q.s)?;
            }
        }
        Ok(())
    }
}

/// Real zeros of `L'` on `[sigma1, sigma2]`, each with a sign-change
/// certificate. Cells that cannot be settled are reported as suspects.
pub fn count_real_zeros(engine: &LEngine, sigma1: f64, sigma2: f64, grid_step: f64, refine_tol: f64) -> Result<ZeroRecord> {
    if !(0.5 <= sigma1 && sigma1 < sigma2 && sigma2 <= 1.0) {
        return Err(Error::Domain(format!("need 1/2 <= sigma1 < sigma2 <= 1, got [{sigma1}, {sigma2}]")));
    }
    if !(grid_step > 0.0 && grid_step <= (sigma2 - sigma1) / 8.0 * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("grid step {grid_step} must be positive and at most (sigma2 - sigma1)/8")));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::Domain("refine_tol must be positive".into()));
    }
    let n = ((sigma2 - sigma1) / grid_step).ceil() as usize;
    let mut points = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = if i == n { sigma2 } else { sigma1 + (sigma2 - sigma1) * i as f64 / n as f64 };
        points.push(grid_point(engine, s)?);
    }
    let mut sc = Scanner {
        engine,
        refine_tol,
        min_cell: (grid_step / 1024.0).max(refine_tol),
        zeros: Vec::new(),
        suspects: Vec::new(),
        contour_used: false,
    };
    for end in [points[0], points[n]] {
        if !end.certified() {
            sc.suspects.push(Suspect { lo: end.s, hi: end.s, reason: "L' vanishes to working accuracy at the interval end".into() });
        }
    }
    let certified: Vec<(usize, GridPoint)> = points.iter().copied().enumerate().filter(|(_, p)| p.certified()).collect();
    for w in certified.windows(2) {
        let ((i, a), (k, b)) = (w[0], w[1]);
        if a.f.signum() != b.f.signum() {
            sc.bisect(a.s, b.s)?;
        } else if k == i + 1 {
            sc.single_sign(a, b)?;
        } else {
            sc.escalate(a.s, b.s, "uncertified grid values without a sign change")?;
        }
    }
    sc.zeros.sort_by(|a, b| a.loc.total_cmp(&b.loc));
    let method = if sc.contour_used { CountMethod::Contour } else { CountMethod::GridBisection };
    Ok(ZeroRecord {
        d: engine.d(),
        sigma1,
        sigma2,
        count: sc.zeros.len() as u32,
        zeros: sc.zeros,
        suspects: sc.suspects,
        method,
    })
}

/// Re-check a certificate with fresh complex-step values at its endpoints.
pub fn verify_certificate(engine: &LEngine, c: &ZeroCertificate) -> Result<bool> {
    let a = engine.l_prime(c.loc - c.halfwidth)?;
    let b = engine.l_prime(c.loc + c.halfwidth)?;
    Ok(a.l_prime.signum() != b.l_prime.signum()
        && a.l_prime.abs() > 3.0 * a.l_prime_err
        && b.l_prime.abs() > 3.0 * b.l_prime_err)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaMin {
    /// First sign change of `Lambda(1/2 + it)`; the rectangle below it is zero free.
    Found { gamma: f64, bracket: [f64; 2], rectangle: Option<RectangleCount> },
    /// The rectangle below the first sign change holds zeros, so the lowest
    /// zero is not the one found on the line.
    BelowFirstSignChange { gamma_line: f64, rectangle: RectangleCount },
    NotFound { t_max: f64 },
}

impl GammaMin {
    pub fn value(&self) -> Option<f64> {
        match self {
            GammaMin::Found { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }
}

pub fn default_gamma_step(d: u64) -> f64 {
    PI / (4.0 * (d as f64).ln())
}

/// Height of the lowest zero of `L(s, chi_d)`, from the sign changes of the
/// real function `t -> Lambda(1/2 + it)`, with a rectangle count over
/// `[1/4, 5/4] x [-t, t]` below it.
pub fn gamma_min(engine: &LEngine, t_max: f64, step: Option<f64>) -> Result<GammaMin> {
    if !(t_max > 0.0 && t_max <= IM_MAX) {
        return Err(Error::Domain(format!("t_max must lie in (0, {IM_MAX}], got {t_max}")));
    }
    let step = step.unwrap_or_else(|| default_gamma_step(engine.d()));
    if !(step > 0.0) {
        return Err(Error::Domain("step must be positive".into()));
    }
    let z = |t: f64| -> Result<(f64, bool)> {
        let (v, e) = engine.lambda_raw(Complex64::new(0.5, t))?;
        Ok((v.re, v.re.abs() > 3.0 * e))
    };
    let (z0, c0) = z(0.0)?;
    if !c0 {
        return Ok(GammaMin::Found { gamma: 0.0, bracket: [0.0, 0.0], rectangle: None });
    }
    let (mut t_prev, mut sign) = (0.0, z0.signum());
    let mut k = 1;
    loop {
        let t = k as f64 * step;
        if t > t_max {
            return Ok(GammaMin::NotFound { t_max });
        }
        let (v, c) = z(t)?;
        if c && v.signum() != sign {
            let (mut lo, mut hi) = (t_prev, t);
            'outer: while hi - lo > 1e-8 {
                for frac in [0.5, 0.4, 0.6] {
                    let m = lo + frac * (hi - lo);
                    let (vm, cm) = z(m)?;
                    if cm {
                        if vm.signum() == sign {
                            lo = m;
                        } else {
                            hi = m;
                        }
                        continue 'outer;
                    }
                }
                break;
            }
            let gamma = 0.5 * (lo + hi);
            let height = t_prev.max(0.5 * gamma);
            let rect = rectangle_zero_count(engine, [0.25, 1.25], [-height, height])?;
            if rect.count > 0 {
                return Ok(GammaMin::BelowFirstSignChange { gamma_line: gamma, rectangle: rect });
            }
            return Ok(GammaMin::Found { gamma, bracket: [lo, hi], rectangle: Some(rect) });
        }
        if c {
            t_prev = t;
            sign = v.signum();
        }
        k += 1;
    }
}

/// The disc of the zero-free hypothesis: center `1/2 + nu/log x`, radius
/// `nu/log x + 1/(nu^3 log x)`.
pub fn hypothesis_disc(x: f64, nu: f64) -> (f64, f64) {
    let lx = x.ln();
    (0.5 + nu / lx, nu / lx + 1.0 / (nu.powi(3) * lx))
}

/// Radii `r_0 = s_0 - 1/2` and `r_0 + k/(4 nu^3 log x)` for `k = 1, 2, 3`.
pub fn concentric_radii(x: f64, nu: f64) -> [f64; 4] {
    let lx = x.ln();
    let r0 = nu / lx;
    let step = 1.0 / (4.0 * nu.powi(3) * lx);
    [r0, r0 + step, r0 + 2.0 * step, r0 + 3.0 * step]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisLd {
    pub d: u64,
    pub x: f64,
    pub nu: f64,
    /// `nu <= (log log x)^{1/5}`.
    pub in_range: bool,
    pub center: f64,
    pub radius: f64,
    pub passes: bool,
    pub count: u32,
    pub integral: Complex64,
    /// Located zeros when the disc is not zero free.
    pub witnesses: Vec<Complex64>,
}

pub fn hypothesis_ld_check(engine: &LEngine, x: f64, nu: f64, policy: RangePolicy) -> Result<HypothesisLd> {
    if !(x > std::f64::consts::E.exp() && nu > 0.0) {
        return Err(Error::Domain(format!("need log log x > 1 and nu > 0, got x = {x}, nu = {nu}")));
    }
    let cap = x.ln().ln().powf(0.2);
    let in_range = nu <= cap * (1.0 + 1e-12);
    if !in_range && policy == RangePolicy::Enforce {
        return Err(Error::Domain(format!("nu = {nu} exceeds (log log x)^(1/5) = {cap}")));
    }
    let (center, radius) = hypothesis_disc(x, nu);
    let c = Complex64::new(center, 0.0);
    let exp = engine.expansion(c, radius)?;
    let f = ModelFunction { expansion: &exp, target: Target::Lambda };
    let count = match circle_zero_count(&f, c, radius) {
        Ok(r) => r,
        Err(e) if e.is_indeterminate() => return Err(Error::Indeterminate(format!("hypothesis disc for d = {}: {e}", engine.d()))),
        Err(e) => return Err(e),
    };
    let witnesses = locate_in_circle(&f, c, radius, count.count)?;
    Ok(HypothesisLd {
        d: engine.d(),
        x,
        nu,
        in_range,
        center,
        radius,
        passes: count.count == 0,
        count: count.count,
        integral: count.integral,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(roots: Vec<Complex64>) -> impl Fn(Complex64) -> Result<Sample> {
        move |s: Complex64| {
            let mut f = Complex64::new(1.0, 0.0);
            let mut df = Complex64::new(0.0, 0.0);
            for r in &roots {
                df = df * (s - r) + f;
                f *= s - r;
            }
            Ok(Sample { f, df, f_err: 1e-15, df_err: 1e-15 })
        }
    }

    #[test]
    fn circle_count_of_polynomial() {
        let roots = vec![Complex64::new(0.1, 0.2), Complex64::new(-0.3, 0.0), Complex64::new(2.0, 0.0)];
        let f = poly(roots.clone());
        let c = circle_zero_count(&f, Complex64::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(c.count, 2);
        assert!((c.integral_512.re - 2.0).abs() < 0.1);
        let located = locate_in_circle(&f, Complex64::new(0.0, 0.0), 1.0, 2).unwrap();
        assert!((located[0] - roots[1]).norm() < 1e-10);
        assert!((located[1] - roots[0]).norm() < 1e-10);
    }

    #[test]
    fn proximity_is_refused() {
        let f = poly(vec![Complex64::new(1.0, 0.0)]);
        let e = circle_zero_count(&f, Complex64::new(0.0, 0.0), 1.0).unwrap_err();
        assert!(matches!(e, Error::ContourProximity { .. }));
    }

    #[test]
    fn rectangle_count_of_polynomial() {
        let p = poly(vec![Complex64::new(0.5, 0.3), Complex64::new(0.5, -0.3), Complex64::new(0.7, 0.0), Complex64::new(3.0, 0.0)]);
        let f = |s: Complex64| p(s).map(|x| (x.f, x.f_err));
        let full = rectangle_count_with(&f, [0.0, 1.0], [-1.0, 1.0], false).unwrap();
        let half = rectangle_count_with(&f, [0.0, 1.0], [-1.0, 1.0], true).unwrap();
        assert_eq!(full.count, 3);
        assert_eq!(half.count, 3);
    }

    #[test]
    fn cover_anchor_and_example() {
        let c = CoverCircle::new(1);
        assert!((c.center - 5.0 / 6.0).abs() < 1e-15);
        assert!((c.radius - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.outer - 5.0 / 24.0).abs() < 1e-15);
        // log log x = 3, nu = 2: J = floor((3 - log 2)/log 3) = 2.
        let cover = build_cover(3f64.exp().exp(), 2.0).unwrap();
        assert_eq!(cover.j_formula, 2);
        assert!(cover.verify_grid(10_000));
    }

    #[test]
    fn cover_clamps_nu_and_extends() {
        let x = 1e5;
        let cover = build_cover(x, 10.0).unwrap();
        assert!(cover.nu_clamped);
        assert!(cover.verify_grid(10_000));
        // frac(log_3(log x / nu)) above log_3 2 needs one more circle.
        let lx = 1e6f64.ln();
        let nu = lx / 3f64.powf(1.8);
        let cover = build_cover(1e6, nu).unwrap();
        assert_eq!(cover.j_formula, 1);
        assert_eq!(cover.extended, 1);
        assert!(cover.verify_grid(10_000));
    }

    #[test]
    fn concentric_radii_inside_disc() {
        for x in [1e3, 1e4, 1e5, 1e8] {
            let nu = NuPolicy::Hyp.value(x);
            let r = concentric_radii(x, nu);
            let (c, rad) = hypothesis_disc(x, nu);
            assert!((r[0] - (c - 0.5)).abs() < 1e-15);
            assert!(r[0] < r[1] && r[1] < r[2] && r[2] < r[3] && r[3] < rad);
        }
    }

    #[test]
    fn real_zero_count_matches_fine_grid() {
        let e = LEngine::for_d(8).unwrap();
        let rec = count_real_zeros(&e, 0.6, 1.0, 0.01, 1e-10).unwrap();
        let n = 4000;
        let mut oracle = 0;
        let mut prev = e.l_prime(0.6).unwrap().l_prime;
        for i in 1..=n {
            let v = e.l_prime(0.6 + 0.4 * i as f64 / n as f64).unwrap().l_prime;
            if v.signum() != prev.signum() {
                oracle += 1;
            }
            prev = v;
        }
        assert_eq!(rec.count, oracle);
        assert!(rec.suspects.is_empty());
        for z in &rec.zeros {
            assert!(verify_certificate(&e, z).unwrap());
        }
    }

    #[test]
    fn gamma_min_for_8() {
        let e = LEngine::for_d(8).unwrap();
        let g = gamma_min(&e, 20.0, None).unwrap();
        let gamma = g.value().unwrap();
        let v = e.completed_lambda(Complex64::new(0.5, gamma)).unwrap();
        assert!(v.lambda.norm() < 1e-6);
        // Independent scan at a tenth of the step.
        let step = default_gamma_step(8) / 10.0;
        let mut t = 0.0;
        let s0 = e.completed_lambda(Complex64::new(0.5, 0.0)).unwrap().lambda.re.signum();
        while e.completed_lambda(Complex64::new(0.5, t + step)).unwrap().lambda.re.signum() == s0 {
            t += step;
        }
        assert!(gamma >= t && gamma <= t + step);
    }

    #[test]
    fn hypothesis_disc_for_small_d() {
        let e = LEngine::for_d(8).unwrap();
        let r = hypothesis_ld_check(&e, 1e3, NuPolicy::Hyp.value(1e3), RangePolicy::Enforce).unwrap();
        assert!(r.passes);
        assert!(r.in_range);
        let over = hypothesis_ld_check(&e, 1e3, 2.0, RangePolicy::Enforce);
        assert!(matches!(over, Err(Error::Domain(_))));
    }
}
