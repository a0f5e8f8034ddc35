// SPDX-License-Identifier: Apache-2.0

//! The family `D(x) = { 8m : m odd squarefree, x/2 <= m <= x }` and its
//! real characters.

use crate::error::{Error, Result};
use crate::primes;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

/// Moduli up to this size get a full residue table on first request.
pub const DEFAULT_TABLE_LIMIT: u64 = 1_000_000;

/// `(2/b)` for odd `b`, indexed by `b mod 8`.
const TWO_TABLE: [i8; 8] = [0, 1, 0, -1, 0, -1, 0, 1];

/// Kronecker symbol `(a/n)` for `a >= 0`, `n >= 1`.
pub fn kronecker(a: u64, n: u64) -> i8 {
    let (mut a, mut b) = (a, n);
    if b == 0 {
        return (a == 1) as i8;
    }
    if a % 2 == 0 && b % 2 == 0 {
        return 0;
    }
    let v = b.trailing_zeros();
    b >>= v;
    let mut k: i8 = if v % 2 == 0 { 1 } else { TWO_TABLE[(a & 7) as usize] };
    loop {
        if a == 0 {
            return if b == 1 { k } else { 0 };
        }
        let v = a.trailing_zeros();
        a >>= v;
        if v % 2 == 1 {
            k *= TWO_TABLE[(b & 7) as usize];
        }
        if a & b & 2 != 0 {
            k = -k;
        }
        let r = a;
        a = b % r;
        b = r;
    }
}

/// A family member `d = 8m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FundamentalDiscriminant {
    pub d: u64,
    pub m: u64,
    #[serde(skip)]
    table: OnceLock<Arc<[i8]>>,
}

impl PartialEq for FundamentalDiscriminant {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
    }
}

impl Eq for FundamentalDiscriminant {}

impl FundamentalDiscriminant {
    /// Build from `m`, checking that `m` is odd and squarefree.
    pub fn from_m(m: u64) -> Result<Self> {
        if m == 0 || m % 2 == 0 || !primes::is_squarefree(m) {
            return Err(Error::Domain(format!("m = {m} is not odd and squarefree")));
        }
        Ok(Self::new_unchecked(m))
    }

    pub fn from_d(d: u64) -> Result<Self> {
        if d % 8 != 0 {
            return Err(Error::Domain(format!("d = {d} is not of the form 8m")));
        }
        Self::from_m(d / 8)
    }

    fn new_unchecked(m: u64) -> Self {
        FundamentalDiscriminant { d: 8 * m, m, table: OnceLock::new() }
    }

    /// `chi_d(n)`, from the residue table when it has been built.
    #[inline]
    pub fn chi(&self, n: u64) -> i8 {
        match self.table.get() {
            Some(t) => t[(n % self.d) as usize],
            None => kronecker(self.d, n),
        }
    }

    /// Residue table `chi_d(0..d)`, built once. Moduli above the table limit
    /// are refused.
    pub fn table(&self) -> Result<Arc<[i8]>> {
        if self.d > DEFAULT_TABLE_LIMIT {
            return Err(Error::Resource(format!(
                "residue table for d = {} exceeds the limit {DEFAULT_TABLE_LIMIT}",
                self.d
            )));
        }
        Ok(self
            .table
            .get_or_init(|| (0..self.d).map(|n| kronecker(self.d, n)).collect())
            .clone())
    }
}

#[derive(Clone, Debug)]
pub struct Family {
    pub x: f64,
    pub members: Vec<FundamentalDiscriminant>,
}

impl Family {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,m\n");
        for fd in &self.members {
            let _ = writeln!(out, "{},{}", fd.d, fd.m);
        }
        out
    }
}

pub fn enumerate_family(x: f64) -> Result<Family> {
    if !(x >= 2.0) || !x.is_finite() {
        return Err(Error::Domain(format!("family needs x >= 2, got {x}")));
    }
    let lo = (x / 2.0).ceil() as u64;
    let hi = x.floor() as u64;
    let members = primes::odd_squarefree_in(lo, hi)
        .into_iter()
        .map(FundamentalDiscriminant::new_unchecked)
        .collect();
    Ok(Family { x, members })
}

/// Mean of `chi_d(n)` over the family.
pub fn char_average(family: &Family, n: u64) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    if n == 0 || n as f64 > family.x {
        return Err(Error::Domain(format!("char_average needs 1 <= n <= x, got n = {n}")));
    }
    let sum: i64 = family.members.iter().map(|fd| fd.chi(n) as i64).sum();
    Ok(sum as f64 / family.len() as f64)
}
