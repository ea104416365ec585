//! Taylor polynomial estimators for `ψ(E[X])` with `ψ(x) = x^p`.
//!
//! Given i.i.d. noisy samples `X_l` with mean `μ` and an anchor `λ ≈ μ`, the
//! degree-k estimator
//!
//! ```text
//! ϑ = Σ_{j=0}^{k} (ψ^(j)(λ)/j!) · Π_{l=1}^{j} (X_l − λ)
//! ```
//!
//! estimates `ψ(μ)` with bias equal to the order-(k+1) Taylor remainder. The
//! averaged variant evaluates `ϑ` on `r` uniformly random ordered k-subsets
//! of a pool of `s` samples and takes the mean, which shrinks the variance by
//! roughly the pool size. Singh's geometric-index estimator is the classical
//! unbiased baseline the polynomial estimator improves on.

use crate::accum::Neumaier;
use crate::rng::SplitMix64;
use crate::Error;

/// Generalized binomial coefficient `C(p, j) = p(p−1)…(p−j+1)/j!`.
///
/// Exactly 0 for integral `p` and `j > p`; `C(p, 0) = 1`.
pub fn gen_binomial(p: f64, j: u32) -> f64 {
    let mut c = 1.0;
    for l in 0..j {
        c *= (p - l as f64) / (l as f64 + 1.0);
    }
    c
}

/// The power function `ψ(x) = x^p`, `p > 0`.
#[derive(Clone, Copy, Debug)]
pub struct PowerFunction {
    p: f64,
}

impl PowerFunction {
    pub fn new(p: f64) -> Self {
        assert!(p > 0.0 && p.is_finite(), "power exponent must be positive");
        PowerFunction { p }
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, x: f64) -> f64 {
        x.powf(self.p)
    }

    /// `ψ^(j)(λ)/j! = C(p, j)·λ^{p−j}`.
    pub fn taylor_coefficient(&self, anchor: f64, j: u32) -> f64 {
        gen_binomial(self.p, j) * anchor.powf(self.p - j as f64)
    }
}

/// Parameters of the (averaged) Taylor polynomial estimator.
#[derive(Clone, Copy, Debug)]
pub struct TaylorConfig {
    pub psi: PowerFunction,
    /// Anchor λ; the expansion point, must be positive.
    pub anchor: f64,
    /// Polynomial degree k.
    pub degree: usize,
    /// Number of averaged groups r.
    pub num_groups: usize,
    /// Pool size s (number of samples handed to [`averaged_taylor`]).
    pub pool_size: usize,
}

impl TaylorConfig {
    pub fn new(
        p: f64,
        anchor: f64,
        degree: usize,
        num_groups: usize,
        pool_size: usize,
    ) -> Result<Self, Error> {
        if anchor <= 0.0 || !anchor.is_finite() {
            return Err(Error::Config(format!(
                "anchor must be positive, got {anchor}"
            )));
        }
        if num_groups < 1 {
            return Err(Error::Config("need at least one averaging group".into()));
        }
        if pool_size < degree {
            return Err(Error::Config(format!(
                "pool size {pool_size} smaller than degree {degree}"
            )));
        }
        Ok(TaylorConfig {
            psi: PowerFunction::new(p),
            anchor,
            degree,
            num_groups,
            pool_size,
        })
    }

    /// Whether the averaging variance bounds may be quoted (`s ≥ 16k`).
    pub fn averaging_premise_ok(&self) -> bool {
        self.pool_size >= 16 * self.degree
    }

    /// Coefficients `a_v = C(p,v)·λ^{p−v}` for `v = 0..=degree`, by the
    /// recurrence `a_{v+1} = a_v·(p−v)/((v+1)·λ)`.
    fn coefficients(&self) -> Vec<f64> {
        let p = self.psi.exponent();
        let mut coeffs = Vec::with_capacity(self.degree + 1);
        let mut a = self.anchor.powf(p);
        coeffs.push(a);
        for v in 0..self.degree {
            a *= (p - v as f64) / ((v as f64 + 1.0) * self.anchor);
            coeffs.push(a);
        }
        coeffs
    }
}

/// Evaluates `ϑ` on exactly `k = cfg.degree` samples, in the given order.
///
/// Prefix products of `(X_l − λ)` are accumulated incrementally (O(k)
/// multiplies) and the polynomial sum is compensated.
pub fn taylor_estimate(cfg: &TaylorConfig, samples: &[f64]) -> f64 {
    assert_eq!(
        samples.len(),
        cfg.degree,
        "taylor_estimate requires exactly {} samples",
        cfg.degree
    );
    let coeffs = cfg.coefficients();
    estimate_with_coefficients(cfg.anchor, &coeffs, samples.iter().copied())
}

#[inline]
fn estimate_with_coefficients(
    anchor: f64,
    coeffs: &[f64],
    samples: impl Iterator<Item = f64>,
) -> f64 {
    let mut sum = Neumaier::new();
    sum.add(coeffs[0]);
    let mut prefix = 1.0;
    for (j, x) in samples.enumerate() {
        prefix *= x - anchor;
        sum.add(coeffs[j + 1] * prefix);
    }
    sum.value()
}

/// Averaged estimator `ϑ̄`: mean of `ϑ` over `r` uniform random ordered
/// k-subsets of the pool.
///
/// The pool must have exactly `cfg.pool_size` samples. Each group draws a
/// uniform k-out-of-s injection by partial Fisher-Yates and evaluates the
/// polynomial in the drawn order. The within-group order must stay uniformly
/// random: the low-degree product terms dominate, and evaluating groups in
/// ascending index order would hand every group the same few low-index
/// samples, correlating the groups by a factor ~k/2 beyond what the averaging
/// variance bound tolerates. Deterministic for a fixed `seed`.
pub fn averaged_taylor(cfg: &TaylorConfig, samples: &[f64], seed: u64) -> f64 {
    assert_eq!(
        samples.len(),
        cfg.pool_size,
        "averaged_taylor requires exactly {} pool samples",
        cfg.pool_size
    );
    let s = samples.len();
    let k = cfg.degree;
    let coeffs = cfg.coefficients();
    let mut rng = SplitMix64::new(seed);

    let mut indices: Vec<u32> = (0..s as u32).collect();
    let mut swaps: Vec<usize> = vec![0; k];

    let mut total = Neumaier::new();
    for _ in 0..cfg.num_groups {
        for (l, swap) in swaps.iter_mut().enumerate() {
            let j = l + rng.next_below((s - l) as u64) as usize;
            indices.swap(l, j);
            *swap = j;
        }
        total.add(estimate_with_coefficients(
            cfg.anchor,
            &coeffs,
            indices[..k].iter().map(|&a| samples[a as usize]),
        ));
        // Undo the partial shuffle so every group samples the identity pool.
        for l in (0..k).rev() {
            indices.swap(l, swaps[l]);
        }
    }
    total.value() / cfg.num_groups as f64
}

/// Singh's unbiased estimator `θ` for `ψ(E[X])`:
/// draw `N` geometric (`Pr[N = j] = 2^{−(j−0)−1}`), consume `N` fresh samples
/// and return `2^{N+1}·(ψ^(N)(λ)/N!)·Π (X_l − λ)`.
///
/// `N` is capped at `n_cap` (the tail event has probability `2^{−n_cap}`).
/// Panics if the sample source runs dry.
pub fn singh_estimate(
    psi: PowerFunction,
    anchor: f64,
    samples: &mut impl Iterator<Item = f64>,
    rng: &mut SplitMix64,
    n_cap: u32,
) -> f64 {
    assert!(anchor > 0.0, "anchor must be positive");
    let level = rng.next_u64().trailing_zeros().min(n_cap);
    singh_with_level(psi, anchor, level, samples)
}

fn singh_with_level(
    psi: PowerFunction,
    anchor: f64,
    level: u32,
    samples: &mut impl Iterator<Item = f64>,
) -> f64 {
    let mut prod = 1.0;
    for _ in 0..level {
        let x = samples.next().expect("sample source exhausted");
        prod *= x - anchor;
    }
    (level as f64 + 1.0).exp2() * psi.taylor_coefficient(anchor, level) * prod
}

/// Exact mean of `ϑ` for i.i.d. samples with mean `μ`:
/// the partial Taylor sum `Σ_{j=0}^{k} C(p,j)·λ^{p−j}·(μ−λ)^j`.
pub fn analytic_mean(psi: PowerFunction, anchor: f64, mu: f64, degree: usize) -> f64 {
    assert!(anchor > 0.0 && mu > 0.0, "anchor and mean must be positive");
    let p = psi.exponent();
    let d = mu - anchor;
    let mut sum = Neumaier::new();
    let mut term = anchor.powf(p);
    sum.add(term);
    for j in 0..degree {
        term *= (p - j as f64) / ((j as f64 + 1.0) * anchor) * d;
        sum.add(term);
    }
    sum.value()
}

/// Bias and variance bounds for `ϑ` and `ϑ̄` at `ψ(x) = x^p`.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorBounds {
    /// Bias bound `|E[ϑ] − f^p|`; exactly 0 for integral `p ≤ k+1`,
    /// otherwise `12^{−8}·ε^{12}·f^p` with `ε = 2^{−(k−8)/4}`.
    pub bias: f64,
    /// `Var[ϑ] ≤ 3p²·f^{2p−2}·σ²`.
    pub var_single: f64,
    /// `Var[ϑ̄] ≤ p²·f^{2p−2}·σ²·(3/r + (1 + 72^{−10})/s)`.
    pub var_avg: f64,
}

/// Evaluates the bound formulas, checking their premise `f > 9pσ`.
pub fn estimator_bounds(
    p: f64,
    f: f64,
    sigma: f64,
    k: usize,
    s: usize,
    r: usize,
) -> Result<EstimatorBounds, Error> {
    let premise = sigma >= 0.0 && f > 9.0 * p * sigma;
    if !premise {
        return Err(Error::Premise(format!(
            "variance bounds need f > 9pσ (f = {f}, 9pσ = {})",
            9.0 * p * sigma
        )));
    }
    if s < 1 || r < 1 {
        return Err(Error::Premise(
            "averaging bounds need s ≥ 1 and r ≥ 1".into(),
        ));
    }
    let integral = p.fract() == 0.0;
    let bias = if integral && p <= (k + 1) as f64 {
        0.0
    } else {
        if k < 8 {
            return Err(Error::Premise(format!(
                "bias bound needs k ≥ 8 for non-integral p (k = {k})"
            )));
        }
        // ε recovered from k ≥ 4·log2(1/ε) + 8.
        let eps = (-((k - 8) as f64) / 4.0).exp2();
        12.0f64.powi(-8) * eps.powi(12) * f.powf(p)
    };
    let common = p * p * f.powf(2.0 * p - 2.0) * sigma * sigma;
    let var_single = 3.0 * common;
    let var_avg = common * (3.0 / r as f64 + (1.0 + 72.0f64.powi(-10)) / s as f64);
    Ok(EstimatorBounds {
        bias,
        var_single,
        var_avg,
    })
}
