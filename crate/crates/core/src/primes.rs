//! Prime-power position tables.
//!
//! The positive integers split into classes `P_0, P_1, P_2, ...` where `P_i`
//! (`i >= 1`) holds the powers `p_i^1, p_i^2, ...` of the `i`-th prime and
//! `P_0` holds everything else (1 included). Each class is listed in
//! ascending order, so every `n` has a unique position `(class, pos)` with
//! `n = P_class(pos)`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Environment variable overriding the sieve bound of the global table.
pub const PRIME_CACHE_ENV: &str = "PSEUDOSHIFT_PRIME_CACHE";

pub const DEFAULT_SIEVE_BOUND: u64 = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimePosition {
    pub class: u32,
    pub pos: u64,
}

#[derive(Debug)]
pub struct PrimeTable {
    bound: u64,
    smallest_factor: Vec<u32>,
    primes: Vec<u64>,
    /// `plain_rank[n]` = number of elements of `P_0` that are `<= n`.
    plain_rank: Vec<u32>,
}

static GLOBAL: OnceLock<PrimeTable> = OnceLock::new();

/// Shared table sized by [`PRIME_CACHE_ENV`] (or [`DEFAULT_SIEVE_BOUND`]).
pub fn global() -> &'static PrimeTable {
    GLOBAL.get_or_init(|| {
        let bound = std::env::var(PRIME_CACHE_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .filter(|&b| b >= 16)
            .unwrap_or(DEFAULT_SIEVE_BOUND);
        PrimeTable::new(bound)
    })
}

impl PrimeTable {
    pub fn new(bound: u64) -> Self {
        let bound = bound.max(16);
        let len = bound as usize + 1;
        let mut smallest_factor = vec![0u32; len];
        let mut primes = Vec::new();
        for n in 2..len {
            if smallest_factor[n] == 0 {
                smallest_factor[n] = n as u32;
                primes.push(n as u64);
                let mut m = n.saturating_mul(n);
                while m < len {
                    if smallest_factor[m] == 0 {
                        smallest_factor[m] = n as u32;
                    }
                    m += n;
                }
            }
        }
        let mut plain_rank = vec![0u32; len];
        let mut count = 0u32;
        for n in 1..len {
            if !is_prime_power_sieved(&smallest_factor, n as u64) {
                count += 1;
            }
            plain_rank[n] = count;
        }
        PrimeTable {
            bound,
            smallest_factor,
            primes,
            plain_rank,
        }
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// The `i`-th prime, 1-based.
    pub fn prime(&self, i: u32) -> Result<u64> {
        if i == 0 {
            return Err(Error::InvalidArgument("prime index is 1-based".into()));
        }
        self.primes
            .get(i as usize - 1)
            .copied()
            .ok_or(Error::PrimeCacheExceeded {
                value: i as u64,
                bound: self.bound,
            })
    }

    /// 1-based index of a prime `p`.
    fn prime_index(&self, p: u64) -> Result<u32> {
        match self.primes.binary_search(&p) {
            Ok(i) => Ok(i as u32 + 1),
            Err(_) if p > self.bound => Err(Error::PrimeCacheExceeded {
                value: p,
                bound: self.bound,
            }),
            Err(_) => Err(Error::InvalidArgument(format!("{p} is not prime"))),
        }
    }

    /// Position of `n` in the class decomposition.
    pub fn locate(&self, n: u64) -> Result<PrimePosition> {
        if n == 0 {
            return Err(Error::InvalidArgument("0 has no class".into()));
        }
        if n <= self.bound {
            if n == 1 {
                return Ok(PrimePosition { class: 0, pos: 1 });
            }
            let p = self.smallest_factor[n as usize] as u64;
            let mut m = n;
            let mut e = 0u64;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            if m == 1 {
                return Ok(PrimePosition {
                    class: self.prime_index(p)?,
                    pos: e,
                });
            }
            return Ok(PrimePosition {
                class: 0,
                pos: self.plain_rank[n as usize] as u64,
            });
        }
        // Beyond the sieve only prime powers with a cached base can be placed.
        for e in (1..=63u32).rev() {
            let r = integer_root(n, e);
            if r >= 2 && r.checked_pow(e) == Some(n) && is_prime(r) {
                return Ok(PrimePosition {
                    class: self.prime_index(r)?,
                    pos: e as u64,
                });
            }
        }
        Err(Error::PrimeCacheExceeded {
            value: n,
            bound: self.bound,
        })
    }

    /// `P_class(pos)`.
    pub fn element(&self, class: u32, pos: u64) -> Result<u64> {
        if pos == 0 {
            return Err(Error::InvalidArgument("positions are 1-based".into()));
        }
        if class == 0 {
            let total = self.plain_rank[self.bound as usize] as u64;
            if pos > total {
                return Err(Error::PrimeCacheExceeded {
                    value: pos,
                    bound: self.bound,
                });
            }
            let idx = self.plain_rank.partition_point(|&r| (r as u64) < pos);
            return Ok(idx as u64);
        }
        let p = self.prime(class)?;
        let e = u32::try_from(pos).map_err(|_| Error::ValueOverflow(format!("{p}^{pos}")))?;
        p.checked_pow(e)
            .ok_or_else(|| Error::ValueOverflow(format!("{p}^{pos}")))
    }

    /// A lower bound for `P_class(pos)` that never fails: exact when
    /// representable, `u64::MAX` on overflow, `pos` for `P_0` past the sieve.
    pub fn element_floor(&self, class: u32, pos: u64) -> u64 {
        match self.element(class, pos) {
            Ok(v) => v,
            Err(Error::ValueOverflow(_)) => u64::MAX,
            Err(_) if class == 0 => pos,
            Err(_) => u64::MAX,
        }
    }
}

fn is_prime_power_sieved(spf: &[u32], n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let p = spf[n as usize] as u64;
    let mut m = n;
    while m.is_multiple_of(p) {
        m /= p;
    }
    m == 1
}

/// `floor(n^(1/e))`.
pub fn integer_root(n: u64, e: u32) -> u64 {
    if e == 1 || n < 2 {
        return n;
    }
    let mut r = (n as f64).powf(1.0 / e as f64).round() as u64;
    while r > 0 && r.checked_pow(e).is_none_or(|v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(e).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_is_prime_power(n: u64) -> Option<(u64, u64)> {
        for p in 2..=n {
            if (2..p).all(|d| p % d != 0) && n.is_multiple_of(p) {
                let mut m = n;
                let mut e = 0;
                while m.is_multiple_of(p) {
                    m /= p;
                    e += 1;
                }
                return (m == 1).then_some((p, e));
            }
        }
        None
    }

    #[test]
    fn small_table_matches_brute_force() {
        let t = PrimeTable::new(2000);
        let mut plain = 0u64;
        for n in 1..=2000u64 {
            let loc = t.locate(n).unwrap();
            match brute_is_prime_power(n) {
                Some((p, e)) => {
                    assert_eq!(t.prime(loc.class).unwrap(), p, "n = {n}");
                    assert_eq!(loc.pos, e);
                }
                None => {
                    plain += 1;
                    assert_eq!(loc, PrimePosition { class: 0, pos: plain });
                }
            }
            assert_eq!(t.element(loc.class, loc.pos).unwrap(), n);
        }
    }

    #[test]
    fn plain_class_starts_as_expected() {
        let t = PrimeTable::new(100);
        let firsts: Vec<u64> = (1..=8).map(|j| t.element(0, j).unwrap()).collect();
        assert_eq!(firsts, vec![1, 6, 10, 12, 14, 15, 18, 20]);
    }

    #[test]
    fn powers_beyond_the_sieve() {
        let t = PrimeTable::new(1000);
        assert_eq!(t.locate(1 << 40).unwrap(), PrimePosition { class: 1, pos: 40 });
        assert_eq!(t.locate(3u64.pow(30)).unwrap(), PrimePosition { class: 2, pos: 30 });
        assert!(matches!(
            t.locate(1_000_001),
            Err(Error::PrimeCacheExceeded { .. })
        ));
        assert!(matches!(t.element(1, 64), Err(Error::ValueOverflow(_))));
        assert_eq!(t.element_floor(1, 64), u64::MAX);
    }

    #[test]
    fn miller_rabin_agrees_with_sieve() {
        let t = PrimeTable::new(50_000);
        for n in 0..50_000u64 {
            let sieve = n >= 2 && t.smallest_factor[n as usize] as u64 == n;
            assert_eq!(is_prime(n), sieve, "n = {n}");
        }
        assert!(is_prime(18_446_744_073_709_551_557));
    }

    #[test]
    fn integer_roots() {
        assert_eq!(integer_root(1 << 40, 40), 2);
        assert_eq!(integer_root(u64::MAX, 2), 4_294_967_295);
        assert_eq!(integer_root(26, 3), 2);
        assert_eq!(integer_root(27, 3), 3);
    }
}
