// SPDX-License-Identifier: Apache-2.0

//! Gamma-family special functions over jets.

use crate::error::{Error, Result};
use crate::jet::Jet;
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `zeta(k)` for `k = 2..=40`.
const ZETA_2_40: [f64; 39] = [
    1.6449340668482264, 1.2020569031595942, 1.0823232337111381,
    1.03692775514337, 1.0173430619844492, 1.008349277381923,
    1.0040773561979444, 1.0020083928260821, 1.000994575127818,
    1.0004941886041194, 1.000246086553308, 1.0001227133475785,
    1.0000612481350588, 1.000030588236307, 1.0000152822594086,
    1.0000076371976379, 1.000003817293265, 1.0000019082127165,
    1.0000009539620338, 1.0000004769329869, 1.0000002384505027,
    1.000000119219926, 1.000000059608189, 1.0000000298035034,
    1.0000000149015549, 1.0000000074507118, 1.000000003725334,
    1.0000000018626598, 1.0000000009313275, 1.0000000004656628,
    1.000000000232831, 1.0000000001164155, 1.0000000000582077,
    1.0000000000291038, 1.000000000014552, 1.000000000007276,
    1.000000000003638, 1.000000000001819, 1.0000000000009095,
];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Iteration cap for the incomplete gamma expansions. Never reached on the
/// evaluation domain used by the crate; hitting it is reported as an error.
const MAX_ITER: usize = 2000;

/// `ln Gamma(z)` (Lanczos, g = 7, with reflection for `Re z < 1/2`).
///
/// The constant term is on some branch of the logarithm; only `exp` of it and
/// the higher coefficients are used.
pub fn ln_gamma<const K: usize>(z: Jet<K>) -> Jet<K> {
    if z.value().re < 0.5 {
        let one_minus = -z + 1.0;
        let s = (z * PI).sin();
        let ln_pi = Jet::<K>::real(PI.ln());
        return ln_pi - s.ln() - ln_gamma(one_minus);
    }
    let zm = z - 1.0;
    let mut x = Jet::<K>::real(LANCZOS_P[0]);
    for (i, &p) in LANCZOS_P.iter().enumerate().skip(1) {
        x += (zm + i as f64).recip() * p;
    }
    let t = zm + (LANCZOS_G + 0.5);
    (zm + 0.5) * t.ln() - t + x.ln() + LN_SQRT_2PI
}

/// `Gamma(z)`. Left of `Re z = 1/2` the reflection formula is applied to the
/// value itself rather than to the logarithm: on the negative real axis the
/// logarithm sits on its branch cut, and the rounding of `exp(i pi)` would
/// swamp a complex-step perturbation.
pub fn gamma<const K: usize>(z: Jet<K>) -> Jet<K> {
    if z.value().re < 0.5 {
        let s = (z * PI).sin();
        return (s * gamma(-z + 1.0)).recip() * PI;
    }
    ln_gamma(z).exp()
}

pub fn gamma_c(z: Complex64) -> Complex64 {
    gamma(Jet::<1>::constant(z)).value()
}

/// Digamma `Gamma'/Gamma` at a complex point.
pub fn digamma(z: Complex64) -> Complex64 {
    ln_gamma(Jet::<2>::variable(z)).coeff(1)
}

/// True when the lower-series route is preferred for `Gamma(a, x)`.
#[inline]
pub fn prefer_series(a: Complex64, x: f64) -> bool {
    x < a.re + 1.0 || (x < 2.5 && a.im.abs() > x)
}

/// `S(a, x) = sum_k x^k / (a (a+1) ... (a+k))`, so that
/// `gamma_lower(a, x) = x^a e^{-x} S(a, x)`.
pub fn lower_series<const K: usize>(a: Jet<K>, x: f64) -> Result<Jet<K>> {
    let mut ap = a;
    let mut del = a.recip();
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap = ap + 1.0;
        del = del * (ap.recip() * x);
        sum += del;
        if del.max_norm() <= sum.max_norm() * 1e-17 {
            return Ok(sum);
        }
    }
    Err(Error::Accuracy(format!(
        "incomplete gamma series did not converge (a = {}, x = {x})",
        a.value()
    )))
}

/// Continued fraction `C(a, x)` with `Gamma(a, x) = x^a e^{-x} C(a, x)`
/// (modified Lentz).
pub fn upper_fraction<const K: usize>(a: Jet<K>, x: f64) -> Result<Jet<K>> {
    const TINY: f64 = 1e-300;
    let mut b = -a + (x + 1.0);
    let mut c = Jet::<K>::real(1.0 / TINY);
    let mut d = b.recip();
    let mut h = d;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        let an = (a - fi) * fi;
        b = b + 2.0;
        d = d * an + b;
        if d.value().l1_norm() < TINY {
            d.0[0] = Complex64::new(TINY, 0.0);
        }
        c = b + an / c;
        if c.value().l1_norm() < TINY {
            c.0[0] = Complex64::new(TINY, 0.0);
        }
        d = d.recip();
        let del = c * d;
        h *= del;
        if fraction_settled(&(del - 1.0), &h) {
            return Ok(h);
        }
    }
    Err(Error::Accuracy(format!(
        "incomplete gamma continued fraction did not converge (a = {}, x = {x})",
        a.value()
    )))
}

/// Convergence test for the continued fraction. The imaginary part of the
/// value is judged against its own size: at a positive integer `a` the real
/// fraction terminates after one step, and under complex-step
/// differentiation the derivative lives entirely in an imaginary part some
/// twenty orders of magnitude smaller.
fn fraction_settled<const K: usize>(delta: &Jet<K>, h: &Jet<K>) -> bool {
    let v = delta.0[0];
    let hv = h.0[0];
    let im_scale = hv.im.abs() / hv.norm().max(f64::MIN_POSITIVE);
    let higher: f64 = delta.0.iter().skip(1).map(|c| c.l1_norm()).sum();
    v.re.abs() < 1e-16 && v.im.abs() <= 1e-15 * im_scale.min(1.0) && higher < 1e-16
}

/// Upper incomplete gamma `Gamma(a, x)` for complex `a` and real `x > 0`.
pub fn upper_gamma<const K: usize>(a: Jet<K>, x: f64) -> Result<Jet<K>> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("upper_gamma needs x > 0, got {x}")));
    }
    let pref = (a * x.ln() - x).exp();
    if prefer_series(a.value(), x) {
        Ok(gamma(a) - pref * lower_series(a, x)?)
    } else {
        Ok(pref * upper_fraction(a, x)?)
    }
}

/// `(e^u - 1)/u` on jets.
pub fn expm1_over_jet<const K: usize>(u: Jet<K>) -> Jet<K> {
    if u.value().norm() < 0.5 {
        // sum_k u^k / (k+1)!
        let mut r = Jet::<K>::real(0.0);
        let mut fact = [0.0f64; 26];
        fact[0] = 1.0;
        for k in 1..26 {
            fact[k] = fact[k - 1] * k as f64;
        }
        for k in (0..25).rev() {
            r = r * u + 1.0 / fact[k + 1];
        }
        r
    } else {
        (u.exp() - 1.0) / u
    }
}

/// `(Gamma(1 + a) - 1)/a` for `|a| <= 1/4`, from the Taylor series of
/// `ln Gamma(1 + a)`.
fn gamma1p_m1_over<const K: usize>(a: Jet<K>) -> Jet<K> {
    let mut h = Jet::<K>::real(0.0);
    for (i, z) in ZETA_2_40.iter().enumerate().rev() {
        let k = (i + 2) as f64;
        let sign = if (i + 2) % 2 == 0 { 1.0 } else { -1.0 };
        h = h * a + sign * z / k;
    }
    let h = h * a - EULER_GAMMA;
    expm1_over_jet(h * a) * h
}

/// `Gamma(a, x)` for small `|a|` and `x` below about 2, without passing
/// through the pole of `Gamma(a)` at `a = 0`:
/// `Gamma(a, x) = (Gamma(1+a) - 1)/a - (x^a - 1)/a - x^a sum_{k>=1} (-x)^k / (k! (a + k))`.
pub fn upper_gamma_small_a<const K: usize>(a: Jet<K>, x: f64) -> Result<Jet<K>> {
    if a.value().norm() > 0.25 || !(x > 0.0) {
        return Err(Error::Domain(format!("upper_gamma_small_a needs |a| <= 1/4, x > 0 (a = {}, x = {x})", a.value())));
    }
    let lx = x.ln();
    let al = a * lx;
    let first = gamma1p_m1_over(a) - expm1_over_jet(al) * lx;
    let mut coef = 1.0;
    let mut sum = Jet::<K>::real(0.0);
    for k in 1..MAX_ITER {
        coef *= -x / k as f64;
        let t = (a + k as f64).recip() * coef;
        sum += t;
        if t.max_norm() <= 1e-17 * sum.max_norm() && coef.abs() < 1e-17 {
            return Ok(first - al.exp() * sum);
        }
    }
    Err(Error::Accuracy(format!("small-a incomplete gamma did not converge (x = {x})")))
}

/// `(e^u - 1)/u`, accurate near `u = 0`.
pub fn expm1_over(u: Complex64) -> Complex64 {
    if u.norm() < 1e-2 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..12 {
            term = term * u / k as f64;
            sum += term;
        }
        sum
    } else {
        (u.exp() - 1.0) / u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gamma_at_integers_and_half() {
        assert!((gamma_c(c(5.0, 0.0)).re - 24.0).abs() < 1e-12);
        assert!((gamma_c(c(0.5, 0.0)).re - PI.sqrt()).abs() < 1e-14);
        // reflection branch
        assert!((gamma_c(c(-0.5, 0.0)).re + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gamma_complex_reference() {
        // Gamma(0.25 + 3i) from mpmath
        let g = gamma_c(c(0.25, 3.0));
        let want = c(0.017_050_323_934_244_119, -0.001_596_877_420_381_335_9);
        assert!((g - want).norm() < 1e-14 * want.norm() * 10.0, "{g}");
    }

    #[test]
    fn digamma_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(c(1.0, 0.0)).re + euler).abs() < 1e-13);
        // psi(0.75) = -gamma + pi/2 - 3 ln 2
        let want = -euler + PI / 2.0 - 3.0 * 2f64.ln();
        assert!((digamma(c(0.75, 0.0)).re - want).abs() < 1e-13);
    }

    #[test]
    fn upper_gamma_both_regimes() {
                let a = Jet::<1>::real(0.5);
        for &(x, want) in &[
            (0.3, 0.777_359_311_249_808_1),
            (1.7, 0.115_557_644_060_281_45),
            (9.0, 3.915_438_647_355_951e-5),
        ] {
            let got = upper_gamma(a, x).unwrap().value();
            assert!((got.re - want).abs() < 2e-15 * want.max(1e-300) * 50.0, "x={x} got={got}");
            assert!(got.im.abs() < 1e-18);
        }
    }

    #[test]
    fn upper_gamma_complex_a() {
        // Gamma(0.35 + 2.5i, 1.2) from mpmath
        let a = Jet::<1>::constant(c(0.35, 2.5));
        let want = c(0.016_669_759_043_637_095, 0.136_720_612_549_465_1);
        let got = upper_gamma(a, 1.2).unwrap().value();
        assert!((got - want).norm() < 1e-13, "{got}");
    }

    #[test]
    fn small_a_has_no_pole() {
        let g0 = upper_gamma_small_a(Jet::<1>::real(0.0), 0.3).unwrap().value();
        assert!((g0.re - 0.905_676_651_675_846_7).abs() < 1e-15, "{g0}");
        let g = upper_gamma_small_a(Jet::<1>::real(1e-3), 0.3).unwrap().value();
        assert!((g.re - 0.905_316_119_475_663_2).abs() < 1e-15, "{g}");
        let g = upper_gamma_small_a(Jet::<1>::constant(c(0.05, -0.07)), 1.5).unwrap().value();
        assert!((g - c(0.103_715_988_654_293_45, -0.005_525_356_615_849_167)).norm() < 1e-15, "{g}");
        // agrees with the generic route away from the pole, derivatives included
        let a = Jet::<3>::variable(c(0.2, 0.1));
        let s = upper_gamma_small_a(a, 0.7).unwrap();
        let r = upper_gamma(a, 0.7).unwrap();
        for k in 0..3 {
            assert!((s.coeff(k) - r.coeff(k)).norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn regimes_agree_at_switch() {
        let a = Jet::<2>::variable(c(0.4, 0.7));
        for &x in &[0.8f64, 1.4, 2.0, 3.5] {
            let pref = (a * x.ln() - x).exp();
            let s = gamma(a) - pref * lower_series(a, x).unwrap();
            let f = pref * upper_fraction(a, x).unwrap();
            assert!((s.value() - f.value()).norm() < 1e-13, "x={x}");
            assert!((s.coeff(1) - f.coeff(1)).norm() < 1e-12, "x={x}");
        }
    }
}
