//! The composite `F_p` estimator: parameter derivation, scaled ingestion,
//! `F_2` estimation and the query path computing `Θ`.
//!
//! An [`FpSketch`] holds three linear substructures sharing one master seed:
//! a heavy-hitter CountSketch and a Taylor-sample CountSketch fed with the
//! rescaled stream `(i, v·y_i)`, and a tug-of-war sketch fed with the raw
//! stream. The query
//!
//! 1. estimates `F_2` and sets the threshold `T̂_g` and error `Δ_g`,
//! 2. collects heavy candidates `H_g` with `f̂_i = ĝ_i / y_i`,
//! 3. retains `H = {i : y_i ≥ 2^{l(f̂_i)/2}}`,
//! 4. aborts with `Θ = 0` unless every candidate keeps at least half its
//!    tables free of collisions with other candidates,
//! 5. runs the averaged Taylor estimator on the non-collision readings of
//!    every retained item above the significance cutoff, and
//! 6. sums the estimates reweighted by the retention probability `ρ_i`.

use crate::accum::{lower_median_f64, Neumaier};
use crate::countsketch::{CountSketch, SketchRole};
use crate::hashing::HashFamily;
use crate::pareto::{y_second_moment, YDistribution};
use crate::rng::derive_seed;
use crate::stream::StreamUpdate;
use crate::taylor::{averaged_taylor, TaylorConfig};
use crate::{ceil_log2, Error};

/// Seed-derivation tags, one per named randomness consumer.
pub(crate) const TAG_SCALER: u64 = 0x01;
pub(crate) const TAG_QUERY_SUBSETS: u64 = 0x02;
pub(crate) const TAG_TRIAL: u64 = 0x03;
pub(crate) const TAG_COPY: u64 = 0x04;

/// Multiplicative overrides applied to the derived structure sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpScales {
    pub b: f64,
    pub s: f64,
    pub k: f64,
    pub r: f64,
}

impl Default for FpScales {
    fn default() -> Self {
        FpScales {
            b: 1.0,
            s: 1.0,
            k: 1.0,
            r: 1.0,
        }
    }
}

pub const DEFAULT_F2_TABLES: usize = 9;
pub const DEFAULT_F2_BUCKETS: u64 = 8 * 256 * 256;

/// Fully derived sketch configuration.
///
/// [`FpConfig::derive`] is the validated constructor; fields are public so
/// tests and calibration harnesses can build degenerate shapes directly.
#[derive(Clone, Debug, PartialEq)]
pub struct FpConfig {
    pub n: u64,
    pub p: f64,
    pub epsilon: f64,
    pub master_seed: u64,
    /// Tables per CountSketch (s).
    pub tables: usize,
    /// Buckets per table (C).
    pub buckets: u64,
    /// Heavy-hitter budget parameter (B).
    pub b: u64,
    /// Taylor polynomial degree (k).
    pub taylor_degree: usize,
    /// Averaging groups (r).
    pub taylor_groups: usize,
    /// Fixed-point fractional bits (q).
    pub frac_bits: u32,
    pub f2_tables: usize,
    pub f2_buckets: u64,
}

impl FpConfig {
    /// Derives every structure size from `(n, p, ε)`:
    /// `k = ⌈scale_k·max(4⌈log2 n⌉+4, 144)⌉`, `s = ⌈scale_s·32·max(…)⌉`,
    /// `r = ⌈scale_r·12s⌉`, `B = ⌈scale_b·1000·n^{1−2/p}·E[y²]/(ε²·min(log2 n,
    /// ε^{4/p−2}))⌉`, `C = ⌈121p²B⌉`, `q = ⌈log2 n⌉ + 4`.
    pub fn derive(
        n: u64,
        p: f64,
        epsilon: f64,
        scales: FpScales,
        master_seed: u64,
    ) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::Config(format!(
                "domain size n = {n} must be at least 2"
            )));
        }
        let log2n = (n as f64).log2();
        if p <= 2.0 || !p.is_finite() {
            return Err(Error::Config(format!("exponent p = {p} must exceed 2")));
        }
        if p >= log2n {
            return Err(Error::Config(format!(
                "exponent p = {p} must be below log2(n) = {log2n}"
            )));
        }
        let eps_floor = (n as f64).powf(-1.0 / p);
        if epsilon.is_nan() || epsilon < eps_floor {
            return Err(Error::Config(format!(
                "epsilon = {epsilon} below the meaningful floor n^(-1/p) = {eps_floor}"
            )));
        }
        if epsilon > 1.0 {
            return Err(Error::Config(format!(
                "epsilon = {epsilon} must be at most 1"
            )));
        }
        for (name, v) in [
            ("b", scales.b),
            ("s", scales.s),
            ("k", scales.k),
            ("r", scales.r),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "scale_{name} = {v} must be positive and finite"
                )));
            }
        }

        let base = (4 * ceil_log2(n) + 4).max(144) as f64;
        let taylor_degree = (scales.k * base).ceil() as usize;
        let tables = (scales.s * 32.0 * base).ceil() as usize;
        let taylor_groups = (scales.r * 12.0 * tables as f64).ceil() as usize;
        if tables < 2 {
            return Err(Error::Config(format!(
                "scale_s = {} yields {tables} tables; at least 2 required",
                scales.s
            )));
        }
        if taylor_degree > tables / 2 {
            return Err(Error::Config(format!(
                "taylor degree {taylor_degree} exceeds the per-item sample quota {} (s/2)",
                tables / 2
            )));
        }

        let ey2 = y_second_moment(p, n);
        let min_term = log2n.min(epsilon.powf(4.0 / p - 2.0));
        let b_real = scales.b * 1000.0 * (n as f64).powf(1.0 - 2.0 / p) * ey2
            / (epsilon * epsilon * min_term);
        if !b_real.is_finite() || b_real <= 0.0 {
            return Err(Error::Config(format!(
                "derived B = {b_real} is not a positive finite value"
            )));
        }
        let b = b_real.ceil() as u64;
        let buckets = (121.0 * p * p * b as f64).ceil() as u64;

        Ok(FpConfig {
            n,
            p,
            epsilon,
            master_seed,
            tables,
            buckets,
            b,
            taylor_degree,
            taylor_groups,
            frac_bits: ceil_log2(n) + 4,
            f2_tables: DEFAULT_F2_TABLES,
            f2_buckets: DEFAULT_F2_BUCKETS,
        })
    }

    /// Closed-form `E[y²]` of the scaling law for this `(p, n)`.
    pub fn y_second_moment(&self) -> f64 {
        y_second_moment(self.p, self.n)
    }

    /// Per-item sample quota: the `⌊s/2⌋` lowest-indexed clear tables.
    pub fn pool_size(&self) -> usize {
        self.tables / 2
    }

    /// Ideal threshold `T_g = √(16·E[y²]·F₂/B)` for a known `F₂`.
    pub fn t_g(&self, f2: f64) -> f64 {
        (16.0 * self.y_second_moment() * f2 / self.b as f64).sqrt()
    }

    /// Threshold from an estimated `F̂₂`: `√(257/255)·T_g(F̂₂)`,
    /// which lands in `[T_g, 65T_g/64]` whenever `F̂₂` is within 1/256.
    pub fn t_g_hat(&self, f2_hat: f64) -> f64 {
        (257.0f64 / 255.0).sqrt() * self.t_g(f2_hat)
    }

    /// Heavy-hitter error `Δ_g = T̂_g/(11p)`.
    pub fn delta_g(&self, t_g_hat: f64) -> f64 {
        t_g_hat / (11.0 * self.p)
    }

    /// Whether the averaging variance bounds may be quoted (`s/2 ≥ 16k`).
    pub fn averaging_premise_ok(&self) -> bool {
        self.pool_size() >= 16 * self.taylor_degree
    }

    /// Total counters across all three substructures.
    pub fn counter_count(&self) -> u64 {
        2 * self.tables as u64 * self.buckets + self.f2_tables as u64 * self.f2_buckets
    }

    /// Sketch memory, counters × 8-byte words.
    pub fn memory_bytes(&self) -> u64 {
        self.counter_count() * 8
    }

    /// Bits a counter must hold for a stream of `m` updates of magnitude up
    /// to `max_update`: `log2(m·M·R) + q + 2`. Must stay below 64.
    pub fn counter_bits_required(&self, m: u64, max_update: u64) -> f64 {
        let log_r = 4.0 / self.p * (self.n as f64).log2();
        (m.max(1) as f64).log2()
            + (max_update.max(1) as f64).log2()
            + log_r
            + self.frac_bits as f64
            + 2.0
    }
}

/// Retention level `l(f̂) = max(0, ⌈2·log2(2T̂_g/f̂)⌉)`; the retention
/// threshold on the scaler is `2^{l/2}`.
pub fn level_index(t_g_hat: f64, f_hat: f64) -> u32 {
    assert!(
        t_g_hat > 0.0 && f_hat > 0.0,
        "level_index needs positive inputs"
    );
    let l = (2.0 * (2.0 * t_g_hat / f_hat).log2()).ceil();
    if l <= 0.0 {
        0
    } else {
        l as u32
    }
}

/// Per-candidate query record.
#[derive(Clone, Copy, Debug)]
pub struct ItemTrace {
    pub item: u64,
    /// Magnitude estimate of the rescaled frequency |g_i|.
    pub g_hat: f64,
    pub sign: i8,
    /// The item's scaler y_i (a multiple of 2^{-q}).
    pub y: f64,
    /// `ĝ_i / y_i`.
    pub f_hat: f64,
    pub level: u32,
    /// Retention probability `ρ_i = Pr[y ≥ 2^{l/2}]`.
    pub rho: f64,
    /// Number of collision-free tables |Q(i)|.
    pub nc_tables: usize,
    /// Whether the scaler cleared the retention threshold (i ∈ H).
    pub in_heavy_set: bool,
    /// Whether the item contributed to Θ.
    pub included: bool,
    pub theta_bar: Option<f64>,
}

/// Full query transcript.
#[derive(Clone, Debug)]
pub struct QueryTrace {
    pub f2_hat: f64,
    pub t_g_hat: f64,
    pub delta_g: f64,
    /// Significance cutoff `(ε^{2/p}·F̂₂/(4n))^{1/2}` on `f̂_i`.
    pub cutoff: f64,
    pub items: Vec<ItemTrace>,
    pub theta: f64,
    /// Some candidate lost more than half its tables to collisions; Θ = 0.
    pub nc_failed: bool,
}

impl QueryTrace {
    /// Structured text dump: one JSON object with every trace field.
    pub fn to_json(&self) -> String {
        let mut out = String::with_capacity(256 + self.items.len() * 160);
        out.push_str(&format!(
            "{{\"f2_hat\":{},\"t_g_hat\":{},\"delta_g\":{},\"cutoff\":{},\"theta\":{},\"nc_failed\":{},\"items\":[",
            self.f2_hat, self.t_g_hat, self.delta_g, self.cutoff, self.theta, self.nc_failed
        ));
        for (idx, it) in self.items.iter().enumerate() {
            if idx > 0 {
                out.push(',');
            }
            let theta_bar = match it.theta_bar {
                Some(v) => v.to_string(),
                None => "null".into(),
            };
            out.push_str(&format!(
                "{{\"item\":{},\"g_hat\":{},\"sign\":{},\"y\":{},\"f_hat\":{},\"level\":{},\"rho\":{},\"nc_tables\":{},\"in_heavy_set\":{},\"included\":{},\"theta_bar\":{}}}",
                it.item, it.g_hat, it.sign, it.y, it.f_hat, it.level, it.rho, it.nc_tables,
                it.in_heavy_set, it.included, theta_bar
            ));
        }
        out.push_str("]}");
        out
    }
}

const FP_MAGIC: &[u8; 4] = b"FPFS";
const FP_VERSION: u8 = 1;

/// The composite streaming state answering the `Θ` query.
#[derive(Clone, Debug)]
pub struct FpSketch {
    config: FpConfig,
    ydist: YDistribution,
    scaler: HashFamily,
    hh: CountSketch,
    tpest: CountSketch,
    f2: CountSketch,
}

impl FpSketch {
    pub fn new(config: FpConfig) -> Result<Self, Error> {
        if config.taylor_degree > config.pool_size() {
            return Err(Error::Config(format!(
                "taylor degree {} exceeds the per-item sample quota {}",
                config.taylor_degree,
                config.pool_size()
            )));
        }
        let ydist = YDistribution::new(config.p, config.n, config.frac_bits)?;
        let scaler = HashFamily::new(
            config.master_seed,
            derive_seed(0, TAG_SCALER, 0),
            2,
            config.n,
            1,
        )?;
        let hh = CountSketch::new(
            SketchRole::HeavyHitter,
            config.tables,
            config.buckets,
            config.frac_bits,
            config.n,
            config.master_seed,
        )?;
        let tpest = CountSketch::new(
            SketchRole::TaylorSamples,
            config.tables,
            config.buckets,
            config.frac_bits,
            config.n,
            config.master_seed,
        )?;
        let f2 = CountSketch::new(
            SketchRole::SecondMoment,
            config.f2_tables,
            config.f2_buckets,
            0,
            config.n,
            config.master_seed,
        )?;
        Ok(FpSketch {
            config,
            ydist,
            scaler,
            hh,
            tpest,
            f2,
        })
    }

    pub fn config(&self) -> &FpConfig {
        &self.config
    }

    /// The item's scaler in fixed-point units (y_i · 2^q).
    pub fn scaler_fixed(&self, item: u64) -> u64 {
        self.ydist.scaler_fixed(&self.scaler, item)
    }

    pub fn scaler(&self, item: u64) -> f64 {
        self.scaler_fixed(item) as f64 / self.ydist.fixed_scale()
    }

    /// Feeds one update: the rescaled value `v·y_i` into the heavy-hitter and
    /// Taylor-sample structures, the raw `v` into the tug-of-war sketch.
    pub fn ingest(&mut self, item: u64, v: i64) {
        assert!(
            item < self.config.n,
            "item {item} outside [0, {})",
            self.config.n
        );
        let y_fixed = self.ydist.scaler_fixed(&self.scaler, item);
        let scaled = i64::try_from(v as i128 * y_fixed as i128)
            .expect("counter overflow: scaled update exceeds 63 bits");
        self.hh.update(item, scaled);
        self.tpest.update(item, scaled);
        self.f2.update(item, v);
    }

    pub fn ingest_stream(&mut self, updates: &[StreamUpdate]) {
        for u in updates {
            self.ingest(u.item, u.delta);
        }
    }

    /// Cellwise merge of identically configured shards.
    pub fn merge_from(&mut self, other: &Self) -> Result<(), Error> {
        if self.config != other.config {
            return Err(Error::Mismatch(
                "merge requires identical configurations".into(),
            ));
        }
        self.hh.merge_from(&other.hh)?;
        self.tpest.merge_from(&other.tpest)?;
        self.f2.merge_from(&other.f2)
    }

    /// Median-of-tables tug-of-war estimate of the raw second moment.
    pub fn estimate_f2(&self) -> f64 {
        self.f2.f2_estimate()
    }

    /// Computes `Θ` and the full transcript.
    pub fn query(&self) -> QueryTrace {
        let cfg = &self.config;
        let f2_hat = self.estimate_f2();
        if f2_hat <= 0.0 {
            return QueryTrace {
                f2_hat,
                t_g_hat: 0.0,
                delta_g: 0.0,
                cutoff: 0.0,
                items: Vec::new(),
                theta: 0.0,
                nc_failed: false,
            };
        }
        let t_g_hat = cfg.t_g_hat(f2_hat);
        let delta_g = cfg.delta_g(t_g_hat);
        let cutoff = (cfg.epsilon.powf(2.0 / cfg.p) * f2_hat / (4.0 * cfg.n as f64)).sqrt();

        let heavy = self.hh.heavy_candidates(t_g_hat, delta_g, cfg.n);
        let heavy_items = heavy.items();

        // Collision-free table sets for every candidate; any quota miss
        // aborts the query.
        let mut nc_failed = false;
        let q_sets: Vec<Vec<usize>> = heavy
            .entries
            .iter()
            .map(|e| {
                let q = self.tpest.non_collision_tables(e.item, &heavy_items);
                if 2 * q.len() < cfg.tables {
                    nc_failed = true;
                }
                q
            })
            .collect();

        let scale = self.ydist.fixed_scale();
        let pool = cfg.pool_size();
        let mut theta_acc = Neumaier::new();
        let mut items = Vec::with_capacity(heavy.len());
        for (entry, q_set) in heavy.entries.iter().zip(&q_sets) {
            let y = self.scaler_fixed(entry.item) as f64 / scale;
            let f_hat = entry.estimate / y;
            let mut trace = ItemTrace {
                item: entry.item,
                g_hat: entry.estimate,
                sign: entry.sign,
                y,
                f_hat,
                level: 0,
                rho: 0.0,
                nc_tables: q_set.len(),
                in_heavy_set: false,
                included: false,
                theta_bar: None,
            };
            // ĝ ≥ T̂ − Δ > 0 makes f̂ positive; the guard only matters for
            // hand-built degenerate configurations.
            if f_hat > 0.0 {
                let level = level_index(t_g_hat, f_hat);
                let threshold = (level as f64 / 2.0).exp2();
                let rho = self.ydist.tail_prob(threshold);
                trace.level = level;
                trace.rho = rho;
                trace.in_heavy_set = y >= threshold;
                if !nc_failed && trace.in_heavy_set && f_hat > cutoff && rho > 0.0 {
                    let readings: Vec<f64> = q_set[..pool]
                        .iter()
                        .map(|&l| {
                            let cell = self.tpest.raw_cell(l, self.tpest.bucket_of(l, entry.item));
                            (cell as f64 / scale)
                                * self.tpest.sign_of(l, entry.item) as f64
                                * entry.sign as f64
                                / y
                        })
                        .collect();
                    let tcfg =
                        TaylorConfig::new(cfg.p, f_hat, cfg.taylor_degree, cfg.taylor_groups, pool)
                            .expect("validated configuration");
                    let theta_bar = averaged_taylor(
                        &tcfg,
                        &readings,
                        derive_seed(cfg.master_seed, TAG_QUERY_SUBSETS, entry.item),
                    );
                    theta_acc.add(theta_bar / rho);
                    trace.theta_bar = Some(theta_bar);
                    trace.included = true;
                }
            }
            items.push(trace);
        }

        QueryTrace {
            f2_hat,
            t_g_hat,
            delta_g,
            cutoff,
            items,
            theta: if nc_failed { 0.0 } else { theta_acc.value() },
            nc_failed,
        }
    }

    /// Versioned binary snapshot: config header plus the three sketch blobs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FP_MAGIC);
        out.push(FP_VERSION);
        out.extend_from_slice(&self.config.n.to_le_bytes());
        out.extend_from_slice(&self.config.p.to_le_bytes());
        out.extend_from_slice(&self.config.epsilon.to_le_bytes());
        out.extend_from_slice(&self.config.master_seed.to_le_bytes());
        out.extend_from_slice(&(self.config.tables as u64).to_le_bytes());
        out.extend_from_slice(&self.config.buckets.to_le_bytes());
        out.extend_from_slice(&self.config.b.to_le_bytes());
        out.extend_from_slice(&(self.config.taylor_degree as u64).to_le_bytes());
        out.extend_from_slice(&(self.config.taylor_groups as u64).to_le_bytes());
        out.extend_from_slice(&self.config.frac_bits.to_le_bytes());
        out.extend_from_slice(&(self.config.f2_tables as u64).to_le_bytes());
        out.extend_from_slice(&self.config.f2_buckets.to_le_bytes());
        for blob in [
            self.hh.to_bytes(),
            self.tpest.to_bytes(),
            self.f2.to_bytes(),
        ] {
            out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            out.extend_from_slice(&blob);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let mut pos = 0usize;
        let take = |pos: &mut usize, len: usize| -> Result<&[u8], Error> {
            let end = *pos + len;
            if end > bytes.len() {
                return Err(Error::Config("sketch blob truncated".into()));
            }
            let out = &bytes[*pos..end];
            *pos = end;
            Ok(out)
        };
        if take(&mut pos, 4)? != FP_MAGIC {
            return Err(Error::Config("bad composite sketch magic".into()));
        }
        if take(&mut pos, 1)?[0] != FP_VERSION {
            return Err(Error::Config("unsupported composite sketch version".into()));
        }
        let u64_at = |pos: &mut usize| -> Result<u64, Error> {
            Ok(u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
        };
        let n = u64_at(&mut pos)?;
        let p = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let epsilon = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let master_seed = u64_at(&mut pos)?;
        let tables = u64_at(&mut pos)? as usize;
        let buckets = u64_at(&mut pos)?;
        let b = u64_at(&mut pos)?;
        let taylor_degree = u64_at(&mut pos)? as usize;
        let taylor_groups = u64_at(&mut pos)? as usize;
        let frac_bits = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        let f2_tables = u64_at(&mut pos)? as usize;
        let f2_buckets = u64_at(&mut pos)?;
        let config = FpConfig {
            n,
            p,
            epsilon,
            master_seed,
            tables,
            buckets,
            b,
            taylor_degree,
            taylor_groups,
            frac_bits,
            f2_tables,
            f2_buckets,
        };
        let mut sketch = FpSketch::new(config)?;
        for target in [&mut sketch.hh, &mut sketch.tpest, &mut sketch.f2] {
            let len = u64_at(&mut pos)? as usize;
            *target = CountSketch::from_bytes(take(&mut pos, len)?)?;
        }
        if pos != bytes.len() {
            return Err(Error::Config(
                "trailing bytes after composite sketch".into(),
            ));
        }
        Ok(sketch)
    }
}

/// Result of running an odd number of independent copies and taking the
/// median `Θ` over the copies whose non-collision check passed.
#[derive(Clone, Debug)]
pub struct MedianEstimate {
    pub theta: f64,
    /// (copy seed, Θ, nc_failed) per copy, in copy order.
    pub copies: Vec<(u64, f64, bool)>,
    pub nc_failures: usize,
    /// Every copy failed the non-collision check; `theta` is 0.
    pub all_failed: bool,
}

/// Runs `copies` independent sketches (seeds derived from the base config)
/// over the stream and returns the median `Θ` of the non-failed copies.
pub fn median_estimate(
    base: &FpConfig,
    stream: &[StreamUpdate],
    copies: usize,
) -> Result<MedianEstimate, Error> {
    if copies == 0 || copies.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "copies = {copies} must be odd and positive"
        )));
    }
    let mut per_copy = Vec::with_capacity(copies);
    for c in 0..copies {
        let mut cfg = base.clone();
        cfg.master_seed = derive_seed(base.master_seed, TAG_COPY, c as u64);
        let seed = cfg.master_seed;
        let mut sketch = FpSketch::new(cfg)?;
        sketch.ingest_stream(stream);
        let trace = sketch.query();
        per_copy.push((seed, trace.theta, trace.nc_failed));
    }
    let mut live: Vec<f64> = per_copy.iter().filter(|c| !c.2).map(|c| c.1).collect();
    let nc_failures = copies - live.len();
    if live.is_empty() {
        return Ok(MedianEstimate {
            theta: 0.0,
            copies: per_copy,
            nc_failures,
            all_failed: true,
        });
    }
    Ok(MedianEstimate {
        theta: lower_median_f64(&mut live),
        copies: per_copy,
        nc_failures,
        all_failed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accum::mean_and_variance;
    use crate::stream::{generate, StreamKind};

    fn desk_config(n: u64, seed: u64) -> FpConfig {
        FpConfig {
            n,
            p: 3.0,
            epsilon: 0.5,
            master_seed: seed,
            tables: 4,
            buckets: 4096,
            b: 400,
            taylor_degree: 2,
            taylor_groups: 24,
            frac_bits: ceil_log2(n) + 4,
            f2_tables: 5,
            f2_buckets: 4096,
        }
    }

    #[test]
    fn derived_sizes_match_hand_arithmetic() {
        let cfg = FpConfig::derive(1 << 20, 3.0, 0.1, FpScales::default(), 1).unwrap();
        assert_eq!(cfg.taylor_degree, 144);
        assert_eq!(cfg.tables, 4608);
        assert_eq!(cfg.taylor_groups, 55_296);
        assert_eq!(cfg.frac_bits, 24);
        assert!(cfg.averaging_premise_ok());

        let cfg = FpConfig::derive(u64::MAX, 3.0, 0.5, FpScales::default(), 1).unwrap();
        assert_eq!(cfg.taylor_degree, 260);
        assert_eq!(cfg.tables, 8320);
    }

    #[test]
    fn derive_rejects_out_of_range_parameters() {
        let scales = FpScales::default();
        assert!(matches!(
            FpConfig::derive(4096, 2.0, 0.2, scales, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FpConfig::derive(4096, 12.0, 0.2, scales, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FpConfig::derive(4096, 3.0, 0.01, scales, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FpConfig::derive(4096, 3.0, 1.5, scales, 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FpConfig::derive(1, 3.0, 0.2, scales, 1),
            Err(Error::Config(_))
        ));
        let bad = FpScales {
            k: 100.0,
            ..FpScales::default()
        };
        assert!(matches!(
            FpConfig::derive(4096, 3.0, 0.2, bad, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn level_index_examples() {
        assert_eq!(level_index(8.0, 16.0), 0);
        assert_eq!(level_index(8.0, 8.0), 2);
        assert_eq!(level_index(8.0, 5.0), 4);
        assert_eq!(level_index(8.0, 100.0), 0);
    }

    #[test]
    #[should_panic(expected = "positive inputs")]
    fn level_index_rejects_nonpositive() {
        level_index(8.0, 0.0);
    }

    #[test]
    fn f2_estimate_trivial_cases() {
        let sk = FpSketch::new(desk_config(64, 5)).unwrap();
        assert_eq!(sk.estimate_f2(), 0.0);
        let mut sk = FpSketch::new(desk_config(64, 5)).unwrap();
        for _ in 0..13 {
            sk.ingest(7, 1);
        }
        assert_eq!(sk.estimate_f2(), 169.0);
    }

    #[test]
    fn ingest_and_negation_restore_all_counters() {
        let empty = FpSketch::new(desk_config(64, 6)).unwrap().to_bytes();
        let mut sk = FpSketch::new(desk_config(64, 6)).unwrap();
        sk.ingest(3, 9);
        sk.ingest(11, -2);
        sk.ingest(3, -9);
        sk.ingest(11, 2);
        assert_eq!(sk.to_bytes(), empty);
    }

    #[test]
    fn repeated_updates_scale_by_the_item_scaler() {
        let mut sk = FpSketch::new(desk_config(64, 7)).unwrap();
        for _ in 0..4 {
            sk.ingest(9, 3);
        }
        let expected = 12.0 * sk.scaler(9);
        let got = sk.hh.point_estimate(9);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn sharded_ingestion_merges_bit_exactly() {
        let (_, updates) = generate(StreamKind::Zipf { alpha: 1.2 }, 64, 4000, 1, 8);
        let mut whole = FpSketch::new(desk_config(64, 9)).unwrap();
        whole.ingest_stream(&updates);

        let mut a = FpSketch::new(desk_config(64, 9)).unwrap();
        let mut b = FpSketch::new(desk_config(64, 9)).unwrap();
        a.ingest_stream(&updates[..2000]);
        b.ingest_stream(&updates[2000..]);
        a.merge_from(&b).unwrap();
        assert_eq!(a.to_bytes(), whole.to_bytes());

        let other = FpSketch::new(desk_config(64, 10)).unwrap();
        assert!(matches!(a.merge_from(&other), Err(Error::Mismatch(_))));
    }

    #[test]
    fn snapshot_round_trips() {
        let (_, updates) = generate(StreamKind::Zipf { alpha: 1.2 }, 64, 1000, 1, 30);
        let mut sk = FpSketch::new(desk_config(64, 31)).unwrap();
        sk.ingest_stream(&updates);
        let bytes = sk.to_bytes();
        let back = FpSketch::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.query().to_json(), sk.query().to_json());
        assert!(FpSketch::from_bytes(&bytes[..40]).is_err());
    }

    #[test]
    fn empty_stream_queries_to_zero() {
        let sk = FpSketch::new(desk_config(256, 11)).unwrap();
        let trace = sk.query();
        assert_eq!(trace.theta, 0.0);
        assert!(!trace.nc_failed);
        assert!(trace.items.is_empty());
    }

    #[test]
    fn single_bucket_collisions_zero_the_estimate() {
        // Two planted heavy items in a one-bucket Taylor table cannot keep
        // any collision-free tables; the query must abort with Θ = 0. The
        // heavy-hitter side shares the bucket, so scan for a seed whose sign
        // pattern still reports both items.
        let mut hit = false;
        for seed in 0..64u64 {
            let mut cfg = desk_config(16, seed);
            cfg.buckets = 1;
            cfg.b = 10_000; // push T̂ far below the planted frequencies
            cfg.taylor_degree = 1;
            let mut sk = FpSketch::new(cfg).unwrap();
            sk.ingest(0, 100);
            sk.ingest(1, 100);
            let trace = sk.query();
            if trace.items.len() >= 2 {
                hit = true;
                assert!(trace.nc_failed, "seed {seed}: expected collision abort");
                assert_eq!(trace.theta, 0.0);
                assert!(trace.items.iter().all(|it| !it.included));
                break;
            }
        }
        assert!(hit, "no seed reported both planted items");
    }

    #[test]
    fn lone_heavy_item_yields_its_cube() {
        // One dominant item, huge headroom: f̂ = f exactly, level 0, ρ = 1,
        // and the Taylor pool is noiseless, so Θ = f³ for every seed.
        for seed in [1u64, 2, 3] {
            let mut sk = FpSketch::new(desk_config(16, seed)).unwrap();
            sk.ingest(5, 100);
            let trace = sk.query();
            assert_eq!(trace.items.len(), 1);
            let it = &trace.items[0];
            assert_eq!(it.item, 5);
            assert_eq!(it.level, 0);
            assert_eq!(it.rho, 1.0);
            assert!(it.included);
            assert!(
                (trace.theta - 1e6).abs() / 1e6 < 1e-9,
                "seed {seed}: theta {}",
                trace.theta
            );
        }
    }

    #[test]
    fn median_estimate_handles_copies() {
        let stream = vec![crate::stream::StreamUpdate {
            item: 5,
            delta: 100,
        }];
        let cfg = desk_config(16, 77);

        assert!(median_estimate(&cfg, &stream, 2).is_err());
        assert!(median_estimate(&cfg, &stream, 0).is_err());

        // copies = 1 equals a single run under the derived copy seed
        let single = median_estimate(&cfg, &stream, 1).unwrap();
        let mut one = cfg.clone();
        one.master_seed = derive_seed(cfg.master_seed, TAG_COPY, 0);
        let mut sk = FpSketch::new(one).unwrap();
        sk.ingest_stream(&stream);
        assert_eq!(single.theta, sk.query().theta);

        // deterministic stream: every copy recovers exactly f³
        let med = median_estimate(&cfg, &stream, 5).unwrap();
        assert!(!med.all_failed);
        assert_eq!(med.nc_failures, 0);
        assert!((med.theta - 1e6).abs() / 1e6 < 1e-9);
        for (_, theta, _) in &med.copies {
            assert!((theta - 1e6).abs() / 1e6 < 1e-9);
        }
    }

    #[test]
    fn queries_are_reproducible() {
        let (_, updates) = generate(StreamKind::Zipf { alpha: 1.3 }, 256, 20_000, 1, 13);
        let mk = || {
            let mut sk = FpSketch::new(desk_config(256, 99)).unwrap();
            sk.ingest_stream(&updates);
            sk.query()
        };
        let a = mk();
        let b = mk();
        assert_eq!(a.theta.to_bits(), b.theta.to_bits());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn trace_json_carries_every_field() {
        let mut sk = FpSketch::new(desk_config(16, 3)).unwrap();
        sk.ingest(5, 100);
        let json = sk.query().to_json();
        for key in [
            "f2_hat",
            "t_g_hat",
            "delta_g",
            "cutoff",
            "theta",
            "nc_failed",
            "items",
            "item",
            "g_hat",
            "sign",
            "y",
            "f_hat",
            "level",
            "rho",
            "nc_tables",
            "in_heavy_set",
            "included",
            "theta_bar",
        ] {
            assert!(
                json.contains(&format!("\"{key}\"")),
                "missing {key} in {json}"
            );
        }
    }

    #[test]
    #[should_panic(expected = "counter overflow")]
    fn oversized_updates_are_fatal() {
        let mut sk = FpSketch::new(desk_config(64, 5)).unwrap();
        sk.ingest(3, i64::MAX / 2);
    }

    #[test]
    fn included_items_satisfy_trace_invariants() {
        let (_, updates) = generate(StreamKind::Zipf { alpha: 1.5 }, 256, 30_000, 1, 21);
        for seed in 0..20u64 {
            let mut sk = FpSketch::new(desk_config(256, seed)).unwrap();
            sk.ingest_stream(&updates);
            let trace = sk.query();
            if trace.nc_failed {
                assert_eq!(trace.theta, 0.0);
            }
            for it in &trace.items {
                if it.included {
                    assert!(it.in_heavy_set && it.f_hat > trace.cutoff);
                    assert!(it.theta_bar.is_some());
                }
                if it.in_heavy_set {
                    assert!(it.y >= (it.level as f64 / 2.0).exp2());
                }
            }
        }
    }

    #[test]
    fn heavy_estimates_stay_within_relative_bound() {
        // Retained items carry |f̂ − f| ≤ f/(10p) in nearly all trials.
        let n = 512u64;
        let mut stream: Vec<crate::stream::StreamUpdate> = Vec::new();
        for (item, f) in [(3u64, 900i64), (100, 1400), (200, 2100), (300, 3000)] {
            stream.push(crate::stream::StreamUpdate { item, delta: f });
        }
        for i in 0..n {
            stream.push(crate::stream::StreamUpdate { item: i, delta: 7 });
        }
        let truth = crate::oracle::FrequencyVector::from_updates(n, &stream);

        let mut cfg = desk_config(n, 1234);
        cfg.buckets = 8192;
        cfg.b = 900;
        let mut checked = 0u64;
        let mut ok = 0u64;
        for trial in 0..300u64 {
            let mut c = cfg.clone();
            c.master_seed = derive_seed(cfg.master_seed, TAG_TRIAL, trial);
            let mut sk = FpSketch::new(c).unwrap();
            sk.ingest_stream(&stream);
            for it in sk.query().items.iter().filter(|it| it.in_heavy_set) {
                let f = truth.count(it.item) as f64;
                checked += 1;
                ok += u64::from((it.f_hat - f).abs() <= f / (10.0 * cfg.p));
            }
        }
        assert!(checked > 200, "only {checked} retained items across trials");
        let rate = ok as f64 / checked as f64;
        assert!(rate >= 0.95, "within-bound rate {rate} over {checked}");
    }

    #[test]
    fn taylor_readings_are_unbiased_for_an_isolated_heavy_item() {
        // One-bucket tables fix the hashing; only the sign seeds vary. The
        // per-table readings ν must average to |f| across seeds.
        let n = 64u64;
        let heavy = 9u64;
        let f_heavy = 5000.0;
        let mut values = Vec::new();
        for seed in 0..400u64 {
            let mut cfg = desk_config(n, seed);
            cfg.buckets = 1;
            cfg.b = 100_000;
            cfg.tables = 8;
            let mut sk = FpSketch::new(cfg).unwrap();
            sk.ingest(heavy, f_heavy as i64);
            for i in 0..n {
                if i != heavy {
                    sk.ingest(i, 3);
                }
            }
            let y = sk.scaler(heavy);
            let scale = (1u64 << sk.config().frac_bits) as f64;
            for l in 0..sk.config().tables {
                let cell = sk.tpest.raw_cell(l, 0) as f64 / scale;
                values.push(cell * sk.tpest.sign_of(l, heavy) as f64 / y);
            }
        }
        let (mean, var) = mean_and_variance(&values);
        let se = (var / values.len() as f64).sqrt();
        assert!(
            (mean - f_heavy).abs() < 4.0 * se,
            "mean {mean} vs {f_heavy} (se {se})"
        );
    }
}
