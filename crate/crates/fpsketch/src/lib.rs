//! Streaming estimation of high frequency moments `F_p = Σ_i |f_i|^p` for `p > 2`.
//!
//! A stream is a sequence of updates `(i, v)` that change the frequency of item
//! `i` by the signed integer `v`. This crate maintains a small linear summary of
//! the stream and answers an `F_p` query from it:
//!
//! * every update is rescaled by a pair-wise independent truncated-Pareto
//!   scaler `y_i` ([`pareto::YDistribution`]), so the effective frequency
//!   becomes `g_i = f_i · y_i`;
//! * a [`countsketch::CountSketch`] over the rescaled stream reports heavy
//!   items and their estimates;
//! * a second CountSketch with stronger hash independence supplies, for each
//!   heavy item, per-table frequency readings that feed an averaged Taylor
//!   polynomial estimator of `|f_i|^p` ([`taylor`]);
//! * a bucketed tug-of-war sketch over the raw stream estimates `F_2`, which
//!   sets the heavy-hitter threshold;
//! * each retained item's estimate is reweighted by the probability that its
//!   scaler cleared the retention level, and the sum is the estimate `Θ`
//!   ([`fp::FpSketch::query`]).
//!
//! All randomness flows from a single master seed through a documented
//! splitmix64 derivation ([`rng`]), so every structure and every experiment is
//! reproducible bit for bit. Sketches are linear: ingesting shards on separate
//! sketches with identical seeds and merging is identical to single-sketch
//! ingestion.
//!
//! The [`oracle`] module holds exact brute-force references (frequency vector,
//! moments, heavy sets) and a seeded trial harness; [`stream`] owns the text
//! stream-file format and synthetic generators.

pub mod accum;
pub mod countsketch;
pub mod fp;
pub mod hashing;
pub mod oracle;
pub mod pareto;
pub mod rng;
pub mod stream;
pub mod taylor;

pub use countsketch::{CountSketch, HeavyReport, SketchRole};
pub use fp::{FpConfig, FpScales, FpSketch, QueryTrace};
pub use oracle::FrequencyVector;
pub use pareto::YDistribution;
pub use stream::{StreamKind, StreamMeta, StreamUpdate};

use std::fmt;

/// Errors surfaced by configuration, parsing, merging and bound evaluation.
///
/// Contract violations on hot paths (out-of-range items, counter overflow)
/// panic instead; they indicate a broken caller, not a recoverable state.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration; the message names the violated constraint.
    Config(String),
    /// A bound was requested outside its premises (e.g. `f ≤ 9pσ`).
    Premise(String),
    /// Merge attempted between structurally different sketches.
    Mismatch(String),
    /// Malformed stream file; `line` is 1-based.
    Parse {
        line: usize,
        message: String,
    },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Premise(msg) => write!(f, "bound not applicable: {msg}"),
            Error::Mismatch(msg) => write!(f, "sketch mismatch: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

/// Number of bits needed to index `n` values: smallest `b` with `2^b ≥ n`.
pub(crate) fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}
