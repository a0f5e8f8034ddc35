// SPDX-License-Identifier: Apache-2.0

//! Prime sieves, prime powers and small factorizations.

/// All primes `<= n`, ascending.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i.saturating_mul(i);
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Prime powers `p^k <= limit` with `log p`, ascending in `p^k`.
#[derive(Clone, Debug)]
pub struct PrimePowers {
    pub limit: u64,
    pub entries: Vec<(u64, f64)>,
}

impl PrimePowers {
    pub fn new(limit: u64) -> Self {
        let mut entries = Vec::new();
        for p in primes_up_to(limit) {
            let lp = (p as f64).ln();
            let mut q = p;
            loop {
                entries.push((q, lp));
                match q.checked_mul(p) {
                    Some(n) if n <= limit => q = n,
                    _ => break,
                }
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        PrimePowers { limit, entries }
    }
}

/// Factorization `n = prod p^e` by trial division, ascending primes.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n % 2 == 0 {
        let e = n.trailing_zeros();
        n >>= e;
        out.push((2, e));
    }
    let mut p = 3u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 2;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_squarefree(n: u64) -> bool {
    factorize(n).iter().all(|&(_, e)| e == 1)
}

/// von Mangoldt function.
pub fn von_mangoldt(n: u64) -> f64 {
    let f = factorize(n);
    if f.len() == 1 {
        (f[0].0 as f64).ln()
    } else {
        0.0
    }
}

/// Odd squarefree integers in `[lo, hi]`, ascending. Sieved in blocks by
/// striking multiples of `p^2` for odd primes `p`.
pub fn odd_squarefree_in(lo: u64, hi: u64) -> Vec<u64> {
    const BLOCK: u64 = 1 << 16;
    let mut out = Vec::new();
    if hi < lo || hi == 0 {
        return out;
    }
    let lo = lo.max(1);
    let root = (hi as f64).sqrt() as u64 + 1;
    let sieving: Vec<u64> = primes_up_to(root).into_iter().filter(|&p| p > 2 && p * p <= hi).collect();
    let mut start = lo;
    let mut keep = vec![true; BLOCK as usize];
    while start <= hi {
        let end = (start + BLOCK - 1).min(hi);
        let len = (end - start + 1) as usize;
        keep[..len].iter_mut().for_each(|k| *k = true);
        for &p in &sieving {
            let sq = p * p;
            let mut m = start.div_ceil(sq) * sq;
            while m <= end {
                keep[(m - start) as usize] = false;
                m += sq;
            }
        }
        for (i, &k) in keep[..len].iter().enumerate() {
            let m = start + i as u64;
            if k && m % 2 == 1 {
                out.push(m);
            }
        }
        start = end + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_primes() {
        assert_eq!(primes_up_to(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(primes_up_to(1), Vec::<u64>::new());
        assert_eq!(primes_up_to(100_000).len(), 9592);
    }

    #[test]
    fn prime_powers_to_30() {
        let pp = PrimePowers::new(30);
        let ns: Vec<u64> = pp.entries.iter().map(|e| e.0).collect();
        assert_eq!(ns, vec![2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19, 23, 25, 27, 29]);
    }

    #[test]
    fn mangoldt_values() {
        assert_eq!(von_mangoldt(1), 0.0);
        assert_eq!(von_mangoldt(6), 0.0);
        assert!((von_mangoldt(27) - 3f64.ln()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sieve_matches_factorization(lo in 1u64..200_000, span in 0u64..3000) {
            let got = odd_squarefree_in(lo, lo + span);
            let want: Vec<u64> = (lo..=lo + span).filter(|m| m % 2 == 1 && is_squarefree(*m)).collect();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn factorization_multiplies_back(n in 1u64..10_000_000) {
            let f = factorize(n);
            let back: u64 = f.iter().map(|&(p, e)| p.pow(e)).product();
            prop_assert_eq!(back, n);
        }
    }
}
