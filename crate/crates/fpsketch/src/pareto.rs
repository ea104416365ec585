//! Truncated Pareto scaling distribution on `[1, R]`.
//!
//! Density `A·y^{−(p+1)}` with `R = n^{4/p}` and normalizer
//! `A = p / (1 − R^{−p})`. Per-item scalers are drawn by inverse-CDF sampling
//! from a pair-wise independent hash of the item, then rounded down to the
//! fixed-point grid `2^{−q}` so that scaled updates stay exact integers in the
//! sketch counters. Rounding down keeps the `y ≥ 1` invariant exact.

use crate::hashing::HashFamily;
use crate::{ceil_log2, Error};

/// Closed-form second moment of the scaling law for `(p, n)`:
/// `E[y²] = A·(1 − R^{−(p−2)})/(p − 2)` with `R = n^{4/p}`.
///
/// Free-standing so configuration code can size structures without building
/// the discretized distribution.
pub fn y_second_moment(p: f64, n: u64) -> f64 {
    assert!(p > 2.0, "second moment diverges for p <= 2");
    let upper = (n as f64).powf(4.0 / p);
    let normalizer = p / (1.0 - upper.powf(-p));
    normalizer * (1.0 - upper.powf(-(p - 2.0))) / (p - 2.0)
}

/// The scaling law `𝒴`: density `∝ y^{−(p+1)}` on `[1, R]`, plus its
/// fixed-point discretization.
#[derive(Clone, Copy, Debug)]
pub struct YDistribution {
    p: f64,
    n: u64,
    upper: f64,       // R = n^{4/p}
    normalizer: f64,  // A = p / (1 - R^{-p})
    upper_neg_p: f64, // R^{-p}
    frac_bits: u32,   // q
    scale: f64,       // 2^q
    max_fixed: u64,   // floor(R * 2^q)
}

impl YDistribution {
    pub fn new(p: f64, n: u64, frac_bits: u32) -> Result<Self, Error> {
        if p <= 2.0 || !p.is_finite() {
            return Err(Error::Config(format!(
                "scaling law requires p > 2, got {p}"
            )));
        }
        if n < 2 {
            return Err(Error::Config(
                "scaling law requires domain size n >= 2".into(),
            ));
        }
        if frac_bits > 52 {
            return Err(Error::Config(format!(
                "fractional precision {frac_bits} exceeds 52 bits"
            )));
        }
        let upper = (n as f64).powf(4.0 / p);
        let upper_neg_p = upper.powf(-p);
        let normalizer = p / (1.0 - upper_neg_p);
        let scale = (1u64 << frac_bits) as f64;
        let max_fixed = (upper * scale).floor() as u64;
        Ok(YDistribution {
            p,
            n,
            upper,
            normalizer,
            upper_neg_p,
            frac_bits,
            scale,
            max_fixed,
        })
    }

    /// Default fractional precision: `⌈log2 n⌉ + 4` bits.
    pub fn default_frac_bits(n: u64) -> u32 {
        ceil_log2(n) + 4
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Upper endpoint `R`.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Normalization constant `A`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Analytic inverse CDF: `y = (1 − u·p/A)^{−1/p}`, continuous (no grid).
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        assert!(
            (0.0..1.0).contains(&u),
            "inverse_cdf argument {u} outside [0,1)"
        );
        (1.0 - u * (self.p / self.normalizer)).powf(-1.0 / self.p)
    }

    /// Discretized scaler in fixed-point units (value × 2^q), in `[2^q, R·2^q]`.
    pub fn sample_fixed(&self, u: f64) -> u64 {
        let y = self.inverse_cdf(u);
        ((y * self.scale).floor() as u64).min(self.max_fixed)
    }

    /// Discretized scaler: `inverse_cdf(u)` rounded down to a multiple of
    /// `2^{−q}` and clamped to `[1, R]`. Nondecreasing in `u`.
    pub fn sample_at(&self, u: f64) -> f64 {
        self.sample_fixed(u) as f64 / self.scale
    }

    /// `Pr[y ≥ t]` under the continuous law: `(t^{−p} − R^{−p})/(1 − R^{−p})`
    /// for `t ∈ [1, R]`, 0 above `R`. Arguments below 1 are clamped to 1, so
    /// the full-support tail is exactly 1.
    pub fn tail_prob(&self, t: f64) -> f64 {
        let t = t.max(1.0);
        let tail = (t.powf(-self.p) - self.upper_neg_p) / (1.0 - self.upper_neg_p);
        tail.max(0.0)
    }

    /// Closed-form second moment `E[y²] = A·(1 − R^{−(p−2)})/(p − 2)`.
    pub fn second_moment(&self) -> f64 {
        y_second_moment(self.p, self.n)
    }

    /// Fixed-point scaler for an item, from a pair-wise independent hash.
    /// Deterministic per `(family, item)`.
    pub fn scaler_fixed(&self, family: &HashFamily, item: u64) -> u64 {
        assert_eq!(
            family.independence(),
            2,
            "scaler assignment requires a pair-wise family"
        );
        self.sample_fixed(family.unit(item))
    }

    /// Scaler as a float (a multiple of `2^{−q}`).
    pub fn scaler(&self, family: &HashFamily, item: u64) -> f64 {
        self.scaler_fixed(family, item) as f64 / self.scale
    }

    /// 2^q as a float, for descaling fixed-point values.
    pub fn fixed_scale(&self) -> f64 {
        self.scale
    }
}
