//! t-wise independent hash and sign families over the Mersenne prime 2^61 − 1.
//!
//! A family is a uniformly random polynomial of degree `t − 1` over the field
//! `GF(2^61 − 1)`, which makes its evaluations exactly t-wise independent on
//! any set of at most `t` distinct points. Buckets are obtained by reducing the
//! field value modulo the range; the resulting non-uniformity is at most
//! `range / 2^61 < 2^{-45}` per bucket for ranges up to 2^16 and stays
//! negligible for any range this crate uses. Signs take the parity of the
//! field value, which inherits the family's independence.
//!
//! Families are immutable after construction and safe to share across threads.

use crate::rng::{derive_seed, SplitMix64};
use crate::Error;

/// The Mersenne prime 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Reduces `x < 2^122` modulo 2^61 − 1.
#[inline]
fn reduce_m61(x: u128) -> u64 {
    let folded =
        (x & MERSENNE_61 as u128) as u64 + ((x >> 61) as u64 & MERSENNE_61) + (x >> 122) as u64;
    let folded = (folded & MERSENNE_61) + (folded >> 61);
    if folded >= MERSENNE_61 {
        folded - MERSENNE_61
    } else {
        folded
    }
}

#[inline]
fn mul_m61(a: u64, b: u64) -> u64 {
    reduce_m61(a as u128 * b as u128)
}

#[inline]
fn add_m61(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

/// Draws a uniform field element, rejecting the single out-of-field value.
fn field_element(rng: &mut SplitMix64) -> u64 {
    loop {
        let x = rng.next_u64() >> 3; // 61 bits
        if x != MERSENNE_61 {
            return x;
        }
    }
}

fn check_independence(t: u32, allowed: &[u32]) -> Result<(), Error> {
    if allowed.contains(&t) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "independence t = {t} unsupported (expected one of {allowed:?})"
        )))
    }
}

/// t-wise independent hash family mapping `[0, domain)` to `[0, range)`.
///
/// Coefficients are fully determined by `(master_seed, stream_id)`; two
/// families built from the same pair are identical, and distinct `stream_id`s
/// give independent families.
#[derive(Clone, Copy, Debug)]
pub struct HashFamily {
    coeffs: [u64; 4],
    t: u32,
    domain: u64,
    range: u64,
}

impl HashFamily {
    pub fn new(
        master_seed: u64,
        stream_id: u64,
        t: u32,
        domain: u64,
        range: u64,
    ) -> Result<Self, Error> {
        check_independence(t, &[2, 3, 4])?;
        if domain == 0 || domain > MERSENNE_61 {
            return Err(Error::Config(format!(
                "hash domain {domain} outside [1, 2^61-1]"
            )));
        }
        if range == 0 {
            return Err(Error::Config("hash range must be positive".into()));
        }
        let mut rng = SplitMix64::new(derive_seed(master_seed, 0x68_61_73_68, stream_id));
        let mut coeffs = [0u64; 4];
        for c in coeffs.iter_mut().take(t as usize) {
            *c = field_element(&mut rng);
        }
        Ok(HashFamily {
            coeffs,
            t,
            domain,
            range,
        })
    }

    #[inline]
    fn field_eval(&self, i: u64) -> u64 {
        assert!(
            i < self.domain,
            "item {i} outside hash domain {}",
            self.domain
        );
        // Horner over the degree-(t-1) polynomial.
        let mut acc = self.coeffs[self.t as usize - 1];
        for j in (0..self.t as usize - 1).rev() {
            acc = add_m61(mul_m61(acc, i), self.coeffs[j]);
        }
        acc
    }

    /// Bucket index in `[0, range)`.
    #[inline]
    pub fn bucket(&self, i: u64) -> u64 {
        self.field_eval(i) % self.range
    }

    /// The field evaluation scaled to `[0, 1)` (granularity 2^−61).
    ///
    /// Used for inverse-CDF sampling; ignores `range`.
    #[inline]
    pub fn unit(&self, i: u64) -> f64 {
        self.field_eval(i) as f64 * (1.0 / MERSENNE_61 as f64)
    }

    pub fn independence(&self) -> u32 {
        self.t
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    pub fn range(&self) -> u64 {
        self.range
    }
}

/// t-wise independent Rademacher (±1) family on `[0, domain)`.
#[derive(Clone, Copy, Debug)]
pub struct SignFamily {
    coeffs: [u64; 4],
    t: u32,
    domain: u64,
}

impl SignFamily {
    pub fn new(master_seed: u64, stream_id: u64, t: u32, domain: u64) -> Result<Self, Error> {
        check_independence(t, &[2, 4])?;
        if domain == 0 || domain > MERSENNE_61 {
            return Err(Error::Config(format!(
                "sign domain {domain} outside [1, 2^61-1]"
            )));
        }
        let mut rng = SplitMix64::new(derive_seed(master_seed, 0x73_69_67_6e, stream_id));
        let mut coeffs = [0u64; 4];
        for c in coeffs.iter_mut().take(t as usize) {
            *c = field_element(&mut rng);
        }
        Ok(SignFamily { coeffs, t, domain })
    }

    /// ±1, the parity of the field evaluation.
    #[inline]
    pub fn sign(&self, i: u64) -> i64 {
        assert!(
            i < self.domain,
            "item {i} outside sign domain {}",
            self.domain
        );
        let mut acc = self.coeffs[self.t as usize - 1];
        for j in (0..self.t as usize - 1).rev() {
            acc = add_m61(mul_m61(acc, i), self.coeffs[j]);
        }
        1 - 2 * (acc & 1) as i64
    }

    pub fn independence(&self) -> u32 {
        self.t
    }
}
