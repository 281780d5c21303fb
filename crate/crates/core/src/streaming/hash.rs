use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Degree `t - 1` polynomial over `Z_p`, `p` the smallest prime above the
/// domain size. Any `t` distinct points get jointly uniform values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KWiseHash {
    pub t: usize,
    pub domain: u64,
    pub prime: u64,
    /// Coefficients, constant term first.
    pub coeffs: Vec<u64>,
    /// `floor(2^64 / prime)` for Barrett reduction.
    #[serde(skip)]
    mu: u64,
}

pub fn is_prime(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    if x.is_multiple_of(2) {
        return x == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= x {
        if x.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

pub fn smallest_prime_above(x: u64) -> u64 {
    let mut p = x + 1;
    while !is_prime(p) {
        p += 1;
    }
    p
}

fn barrett_mu(p: u64) -> u64 {
    ((1u128 << 64) / p as u128) as u64
}

#[inline]
fn reduce(a: u64, p: u64, mu: u64) -> u64 {
    let q = ((a as u128 * mu as u128) >> 64) as u64;
    let mut r = a - q * p;
    while r >= p {
        r -= p;
    }
    r
}

impl KWiseHash {
    pub fn new(t: usize, domain: u64, seed: u64) -> Self {
        assert!(t >= 1, "independence degree must be at least 1");
        let prime = smallest_prime_above(domain.max(1));
        let mut r = rng::stream(seed, &[0x6b77_6973]);
        let coeffs = (0..t).map(|_| r.gen_range(0..prime)).collect();
        KWiseHash { t, domain, prime, coeffs, mu: barrett_mu(prime) }
    }

    /// Explicit coefficients over an explicit prime field.
    pub fn with_coefficients(domain: u64, prime: u64, coeffs: Vec<u64>) -> Self {
        assert!(!coeffs.is_empty() && prime > domain && coeffs.iter().all(|&c| c < prime));
        KWiseHash { t: coeffs.len(), domain, prime, coeffs, mu: barrett_mu(prime) }
    }

    /// Words of seed storage.
    pub fn words(&self) -> usize {
        self.t + 3
    }

    pub fn eval(&self, i: u64) -> Result<u64> {
        if i >= self.domain {
            return Err(Error::HashDomain { point: i, domain: self.domain });
        }
        Ok(self.eval_unchecked(i))
    }

    #[inline]
    pub fn eval_unchecked(&self, i: u64) -> u64 {
        let p = self.prime;
        let x = i % p;
        if p <= u32::MAX as u64 {
            let mu = self.mu;
            self.coeffs.iter().rev().fold(0u64, |acc, &c| reduce(acc * x + c, p, mu))
        } else {
            self.coeffs.iter().rev().fold(0u64, |acc, &c| ((acc as u128 * x as u128 + c as u128) % p as u128) as u64)
        }
    }
}
