//! CountSketch with role-specific hash and sign independence.
//!
//! One structure serves three roles: heavy-hitter recovery over the rescaled
//! stream, per-table frequency readings for the Taylor estimator, and (with a
//! sum-of-squared-buckets readout) tug-of-war `F_2` estimation over the raw
//! stream. Cells are fixed-point: a counter holds `value · 2^q` as an `i64`,
//! so rescaled updates accumulate exactly and sketches with identical seeds
//! are linear: update, negation and merge commute bit for bit.
//!
//! Heavy-hitter recovery enumerates the domain at query time; updates stay
//! O(tables) and the reporting cost lands where nothing constrains it.

use crate::accum::lower_median_i64;
use crate::hashing::{HashFamily, SignFamily};
use crate::rng::derive_seed;
use crate::Error;

/// Which substructure a sketch instance implements. Determines hash/sign
/// independence and the seed-derivation tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SketchRole {
    /// Heavy-hitter table: pair-wise hashes, pair-wise signs.
    HeavyHitter,
    /// Taylor-sample table: 3-wise hashes, 4-wise signs.
    TaylorSamples,
    /// Tug-of-war `F_2` table: pair-wise hashes, 4-wise signs.
    SecondMoment,
}

impl SketchRole {
    fn independence(self) -> (u32, u32) {
        match self {
            SketchRole::HeavyHitter => (2, 2),
            SketchRole::TaylorSamples => (3, 4),
            SketchRole::SecondMoment => (2, 4),
        }
    }

    fn tag(self) -> u64 {
        match self {
            SketchRole::HeavyHitter => 0x10,
            SketchRole::TaylorSamples => 0x20,
            SketchRole::SecondMoment => 0x30,
        }
    }

    fn from_byte(b: u8) -> Result<Self, Error> {
        match b {
            1 => Ok(SketchRole::HeavyHitter),
            2 => Ok(SketchRole::TaylorSamples),
            3 => Ok(SketchRole::SecondMoment),
            _ => Err(Error::Config(format!("unknown sketch role byte {b}"))),
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            SketchRole::HeavyHitter => 1,
            SketchRole::TaylorSamples => 2,
            SketchRole::SecondMoment => 3,
        }
    }
}

/// One reported heavy item: its index, magnitude estimate and sign estimate.
#[derive(Clone, Copy, Debug)]
pub struct HeavyEntry {
    pub item: u64,
    /// Nonnegative magnitude estimate (|median| of the table readings).
    pub estimate: f64,
    pub sign: i8,
}

/// Heavy-hitter report: every item whose estimate cleared `threshold − error`.
#[derive(Clone, Debug, Default)]
pub struct HeavyReport {
    pub entries: Vec<HeavyEntry>,
}

impl HeavyReport {
    pub fn items(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.item).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

const MAGIC: &[u8; 4] = b"FPCS";
const FORMAT_VERSION: u8 = 1;

/// `tables × buckets` matrix of fixed-point counters with per-table hash and
/// sign families, all derived from one master seed.
#[derive(Clone, Debug)]
pub struct CountSketch {
    role: SketchRole,
    tables: usize,
    buckets: u64,
    frac_bits: u32,
    domain: u64,
    seed: u64,
    hash: Vec<HashFamily>,
    sign: Vec<SignFamily>,
    cells: Vec<i64>,
}

impl CountSketch {
    pub fn new(
        role: SketchRole,
        tables: usize,
        buckets: u64,
        frac_bits: u32,
        domain: u64,
        master_seed: u64,
    ) -> Result<Self, Error> {
        if tables == 0 {
            return Err(Error::Config("sketch needs at least one table".into()));
        }
        if buckets == 0 {
            return Err(Error::Config("sketch needs at least one bucket".into()));
        }
        let total = (tables as u128) * (buckets as u128);
        if total > (1 << 34) {
            return Err(Error::Config(format!(
                "sketch of {total} counters exceeds the 2^34 cap"
            )));
        }
        let (hash_t, sign_t) = role.independence();
        let mut hash = Vec::with_capacity(tables);
        let mut sign = Vec::with_capacity(tables);
        for l in 0..tables {
            hash.push(HashFamily::new(
                master_seed,
                derive_seed(0, role.tag(), l as u64),
                hash_t,
                domain,
                buckets,
            )?);
            sign.push(SignFamily::new(
                master_seed,
                derive_seed(0, role.tag() + 1, l as u64),
                sign_t,
                domain,
            )?);
        }
        Ok(CountSketch {
            role,
            tables,
            buckets,
            frac_bits,
            domain,
            seed: master_seed,
            hash,
            sign,
            cells: vec![0i64; (tables as u64 * buckets) as usize],
        })
    }

    pub fn role(&self) -> SketchRole {
        self.role
    }

    pub fn tables(&self) -> usize {
        self.tables
    }

    pub fn buckets(&self) -> u64 {
        self.buckets
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cell_count(&self) -> u64 {
        self.tables as u64 * self.buckets
    }

    #[inline]
    fn cell_index(&self, table: usize, bucket: u64) -> usize {
        table * self.buckets as usize + bucket as usize
    }

    /// Adds `delta` (fixed-point units, value × 2^q) times the table sign to
    /// the item's bucket in every table. Panics on counter overflow, which
    /// is a sizing-contract violation, not a recoverable state.
    #[inline]
    pub fn update(&mut self, item: u64, delta: i64) {
        for l in 0..self.tables {
            let b = self.hash[l].bucket(item);
            let signed = self.sign[l].sign(item) * delta;
            let idx = self.cell_index(l, b);
            self.cells[idx] = self.cells[idx]
                .checked_add(signed)
                .expect("counter overflow: sketch sizing contract violated");
        }
    }

    /// Signed frequency estimate in fixed-point units: the lower median over
    /// tables of `cell · ξ_l(i)`.
    pub fn point_estimate_fixed(&self, item: u64) -> i64 {
        let mut readings: Vec<i64> = (0..self.tables)
            .map(|l| {
                self.cells[self.cell_index(l, self.hash[l].bucket(item))] * self.sign[l].sign(item)
            })
            .collect();
        lower_median_i64(&mut readings)
    }

    /// Signed frequency estimate, descaled to a real value.
    pub fn point_estimate(&self, item: u64) -> f64 {
        self.point_estimate_fixed(item) as f64 / (1u64 << self.frac_bits) as f64
    }

    /// Enumerates the domain `[0, n)` and reports every item whose absolute
    /// point estimate is at least `threshold − error`.
    pub fn heavy_candidates(&self, threshold: f64, error: f64, n: u64) -> HeavyReport {
        assert!(
            threshold > error && error > 0.0,
            "heavy-hitter query needs threshold > error > 0"
        );
        assert!(
            n <= self.domain,
            "query domain {n} exceeds sketch domain {}",
            self.domain
        );
        let cut = threshold - error;
        let mut entries = Vec::new();
        for item in 0..n {
            let est = self.point_estimate(item);
            if est.abs() >= cut {
                entries.push(HeavyEntry {
                    item,
                    estimate: est.abs(),
                    sign: if est < 0.0 { -1 } else { 1 },
                });
            }
        }
        HeavyReport { entries }
    }

    /// Tables where `item` collides with no other member of `heavy`.
    /// `heavy` must contain `item`. Indices are ascending.
    pub fn non_collision_tables(&self, item: u64, heavy: &[u64]) -> Vec<usize> {
        assert!(
            heavy.contains(&item),
            "non_collision_tables: item not in heavy set"
        );
        let mut clear = Vec::with_capacity(self.tables);
        for l in 0..self.tables {
            let own = self.hash[l].bucket(item);
            if heavy
                .iter()
                .all(|&j| j == item || self.hash[l].bucket(j) != own)
            {
                clear.push(l);
            }
        }
        clear
    }

    /// Raw fixed-point counter value.
    pub fn raw_cell(&self, table: usize, bucket: u64) -> i64 {
        assert!(
            table < self.tables && bucket < self.buckets,
            "cell index out of range"
        );
        self.cells[self.cell_index(table, bucket)]
    }

    /// Bucket of `item` in `table`.
    pub fn bucket_of(&self, table: usize, item: u64) -> u64 {
        assert!(table < self.tables);
        self.hash[table].bucket(item)
    }

    /// Sign of `item` in `table`.
    pub fn sign_of(&self, table: usize, item: u64) -> i64 {
        assert!(table < self.tables);
        self.sign[table].sign(item)
    }

    /// Tug-of-war second-moment readout: median over tables of the sum of
    /// squared bucket counters, descaled by 2^{2q}.
    pub fn f2_estimate(&self) -> f64 {
        let mut per_table: Vec<i128> = (0..self.tables)
            .map(|l| {
                let row = &self.cells[l * self.buckets as usize..(l + 1) * self.buckets as usize];
                row.iter().map(|&c| c as i128 * c as i128).sum()
            })
            .collect();
        let idx = (per_table.len() - 1) / 2;
        per_table.sort_unstable();
        let scale = (1u64 << self.frac_bits) as f64;
        per_table[idx] as f64 / (scale * scale)
    }

    /// Cellwise sum with an identically configured sketch.
    pub fn merge_from(&mut self, other: &Self) -> Result<(), Error> {
        if self.role != other.role
            || self.tables != other.tables
            || self.buckets != other.buckets
            || self.frac_bits != other.frac_bits
            || self.domain != other.domain
            || self.seed != other.seed
        {
            return Err(Error::Mismatch(
                "merge requires identical role, shape, precision, domain and seed".into(),
            ));
        }
        for (c, o) in self.cells.iter_mut().zip(&other.cells) {
            *c = c
                .checked_add(*o)
                .expect("counter overflow: sketch sizing contract violated");
        }
        Ok(())
    }

    /// Merged copy of two sketches (see [`CountSketch::merge_from`]).
    pub fn merged(&self, other: &Self) -> Result<Self, Error> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// Versioned little-endian binary layout: header (role, shape, precision,
    /// domain, seed) then row-major cells. Byte-identical across platforms.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + self.cells.len() * 8);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.push(self.role.to_byte());
        out.extend_from_slice(&(self.frac_bits as u16).to_le_bytes());
        out.extend_from_slice(&(self.tables as u32).to_le_bytes());
        out.extend_from_slice(&self.buckets.to_le_bytes());
        out.extend_from_slice(&self.domain.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for &c in &self.cells {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        let header = 4 + 1 + 1 + 2 + 4 + 8 + 8 + 8;
        if bytes.len() < header {
            return Err(Error::Config("sketch blob shorter than header".into()));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Config("bad sketch magic".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported sketch format version {}",
                bytes[4]
            )));
        }
        let role = SketchRole::from_byte(bytes[5])?;
        let frac_bits = u16::from_le_bytes(bytes[6..8].try_into().unwrap()) as u32;
        let tables = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let buckets = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let domain = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
        let mut sketch = CountSketch::new(role, tables, buckets, frac_bits, domain, seed)?;
        let body = &bytes[header..];
        if body.len() != sketch.cells.len() * 8 {
            return Err(Error::Config(format!(
                "sketch blob body has {} bytes, expected {}",
                body.len(),
                sketch.cells.len() * 8
            )));
        }
        for (cell, chunk) in sketch.cells.iter_mut().zip(body.chunks_exact(8)) {
            *cell = i64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(sketch)
    }
}
