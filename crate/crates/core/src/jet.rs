// SPDX-License-Identifier: Apache-2.0

//! Truncated Taylor arithmetic over the complex numbers.
//!
//! A `Jet<K>` holds the first `K` Taylor coefficients of an analytic function
//! at a point, `f(s + e) = c[0] + c[1] e + ... + c[K-1] e^(K-1) + O(e^K)`.
//! Running the evaluation code on jets gives derivatives to working precision,
//! which the contour and zero-counting code relies on. `Jet<1>` is plain
//! complex arithmetic.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const K: usize>(pub [Complex64; K]);

impl<const K: usize> Jet<K> {
    pub fn constant(c: Complex64) -> Self {
        let mut out = [ZERO; K];
        out[0] = c;
        Jet(out)
    }

    pub fn real(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }

    /// The independent variable expanded at `at`.
    pub fn variable(at: Complex64) -> Self {
        let mut out = [ZERO; K];
        out[0] = at;
        if K > 1 {
            out[1] = Complex64::new(1.0, 0.0);
        }
        Jet(out)
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        self.0[0]
    }

    #[inline]
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.0[k]
    }

    /// The `k`-th derivative, `k! c[k]`.
    pub fn derivative(&self, k: usize) -> Complex64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.0[k] * fact
    }

    /// Largest coefficient size, measured as `|re| + |im|` (within a factor
    /// `sqrt 2` of the modulus and much cheaper). Used for convergence tests.
    #[inline]
    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, c| m.max(c.l1_norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(mut self, f: f64) -> Self {
        for c in self.0.iter_mut() {
            *c *= f;
        }
        self
    }

    pub fn mul_c(mut self, f: Complex64) -> Self {
        for c in self.0.iter_mut() {
            *c *= f;
        }
        self
    }

    pub fn conj(mut self) -> Self {
        for c in self.0.iter_mut() {
            *c = c.conj();
        }
        self
    }

    pub fn recip(self) -> Self {
        Self::real(1.0) / self
    }

    pub fn exp(self) -> Self {
        let a = &self.0;
        let mut e = [ZERO; K];
        e[0] = a[0].exp();
        for k in 1..K {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += a[j] * e[k - j] * (j as f64);
            }
            e[k] = acc / (k as f64);
        }
        Jet(e)
    }

    /// Principal-branch logarithm of the constant term; higher coefficients
    /// do not depend on the branch.
    pub fn ln(self) -> Self {
        let a = &self.0;
        let mut l = [ZERO; K];
        l[0] = a[0].ln();
        for k in 1..K {
            let mut acc = ZERO;
            for j in 1..k {
                acc += l[j] * a[k - j] * (j as f64);
            }
            l[k] = (a[k] - acc / (k as f64)) / a[0];
        }
        Jet(l)
    }

    /// `exp(self * ln_base)` for a scalar log-base, i.e. `base^self`.
    pub fn exp_scaled(self, ln_base: Complex64) -> Self {
        self.mul_c(ln_base).exp()
    }

    /// Sine by the joint sin/cos recurrence. Going through `exp` would cancel
    /// catastrophically in the imaginary part when `Im z` is tiny, which breaks
    /// complex-step differentiation.
    pub fn sin(self) -> Self {
        let a = &self.0;
        let mut s = [ZERO; K];
        let mut c = [ZERO; K];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..K {
            let mut ds = ZERO;
            let mut dc = ZERO;
            for j in 1..=k {
                let w = a[j] * (j as f64);
                ds += w * c[k - j];
                dc -= w * s[k - j];
            }
            s[k] = ds / (k as f64);
            c[k] = dc / (k as f64);
        }
        Jet(s)
    }
}

impl<const K: usize> Add for Jet<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.0[k] += rhs.0[k];
        }
        self
    }
}

impl<const K: usize> AddAssign for Jet<K> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        for k in 0..K {
            self.0[k] += rhs.0[k];
        }
    }
}

impl<const K: usize> Sub for Jet<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..K {
            self.0[k] -= rhs.0[k];
        }
        self
    }
}

impl<const K: usize> SubAssign for Jet<K> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        for k in 0..K {
            self.0[k] -= rhs.0[k];
        }
    }
}

impl<const K: usize> Neg for Jet<K> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for c in self.0.iter_mut() {
            *c = -*c;
        }
        self
    }
}

impl<const K: usize> Mul for Jet<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut out = [ZERO; K];
        for i in 0..K {
            for j in 0..K - i {
                out[i + j] += self.0[i] * rhs.0[j];
            }
        }
        Jet(out)
    }
}

impl<const K: usize> MulAssign for Jet<K> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const K: usize> Div for Jet<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let b0 = rhs.0[0];
        let mut q = [ZERO; K];
        for k in 0..K {
            let mut acc = self.0[k];
            for j in 0..k {
                acc -= q[j] * rhs.0[k - j];
            }
            q[k] = acc / b0;
        }
        Jet(q)
    }
}

impl<const K: usize> Add<Complex64> for Jet<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Complex64) -> Self {
        self.0[0] += rhs;
        self
    }
}

impl<const K: usize> Add<f64> for Jet<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.0[0] += rhs;
        self
    }
}

impl<const K: usize> Sub<f64> for Jet<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.0[0] -= rhs;
        self
    }
}

impl<const K: usize> Mul<f64> for Jet<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl<const K: usize> Mul<Complex64> for Jet<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Complex64) -> Self {
        self.mul_c(rhs)
    }
}

/// `c - j` for a scalar `c`.
#[inline]
pub fn rsub<const K: usize>(c: f64, j: Jet<K>) -> Jet<K> {
    -j + c
}
