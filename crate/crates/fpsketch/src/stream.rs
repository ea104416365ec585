//! Stream files and synthetic stream generators.
//!
//! A stream file is ASCII text: one `i v` update per line (0-based item index,
//! signed integer increment), `#` comment lines, and a mandatory header
//! comment recording the domain size and the update-magnitude bound:
//!
//! ```text
//! # fpsketch stream v1
//! # n=4096 max-update=1
//! 17 1
//! 40 -3
//! ```
//!
//! Parsing is total: the first malformed line (syntax, item out of `[0, n)`,
//! `|v|` above the bound, or zero) is rejected with its line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::rng::SplitMix64;
use crate::Error;

/// One stream record `(i, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamUpdate {
    pub item: u64,
    pub delta: i64,
}

/// Header data of a stream file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamMeta {
    /// Domain size; every item lies in `[0, n)`.
    pub n: u64,
    /// Bound on `|v|` per update.
    pub max_update: i64,
}

/// Synthetic stream shapes.
#[derive(Clone, Copy, Debug)]
pub enum StreamKind {
    /// Items drawn with probability ∝ rank^{−alpha}, rank r mapping to item
    /// r−1; every update has v = 1.
    Zipf { alpha: f64 },
    /// Item uniform on `[0, n)`, v uniform on `[1, max_update]`.
    Uniform,
    /// First ⌈m/2⌉ updates hit item 0; the rest fall uniformly on `[1, n)`
    /// (or item 0 when n = 1); every update has v = 1.
    SingleHeavy,
}

/// Deterministically generates `m` updates over `[0, n)` for a fixed seed.
pub fn generate(
    kind: StreamKind,
    n: u64,
    m: u64,
    max_update: i64,
    seed: u64,
) -> (StreamMeta, Vec<StreamUpdate>) {
    assert!(n >= 1, "generator needs n >= 1");
    let mut rng = SplitMix64::new(seed);
    let mut updates = Vec::with_capacity(m as usize);
    let meta = match kind {
        StreamKind::Zipf { alpha } => {
            assert!(alpha > 0.0, "zipf exponent must be positive");
            let mut cumulative = Vec::with_capacity(n as usize);
            let mut total = 0.0f64;
            for rank in 1..=n {
                total += (rank as f64).powf(-alpha);
                cumulative.push(total);
            }
            for _ in 0..m {
                let target = rng.next_f64() * total;
                let idx = cumulative.partition_point(|&c| c < target);
                updates.push(StreamUpdate {
                    item: (idx as u64).min(n - 1),
                    delta: 1,
                });
            }
            StreamMeta { n, max_update: 1 }
        }
        StreamKind::Uniform => {
            assert!(max_update >= 1, "uniform generator needs max_update >= 1");
            for _ in 0..m {
                updates.push(StreamUpdate {
                    item: rng.next_below(n),
                    delta: 1 + rng.next_below(max_update as u64) as i64,
                });
            }
            StreamMeta { n, max_update }
        }
        StreamKind::SingleHeavy => {
            let head = m.div_ceil(2);
            for t in 0..m {
                let item = if t < head || n == 1 {
                    0
                } else {
                    1 + rng.next_below(n - 1)
                };
                updates.push(StreamUpdate { item, delta: 1 });
            }
            StreamMeta { n, max_update: 1 }
        }
    };
    (meta, updates)
}

/// Writes the stream in the text format described at module level.
pub fn write_stream(
    w: &mut impl Write,
    meta: StreamMeta,
    updates: &[StreamUpdate],
) -> std::io::Result<()> {
    writeln!(w, "# fpsketch stream v1")?;
    writeln!(w, "# n={} max-update={}", meta.n, meta.max_update)?;
    for u in updates {
        writeln!(w, "{} {}", u.item, u.delta)?;
    }
    Ok(())
}

pub fn write_stream_file(
    path: &Path,
    meta: StreamMeta,
    updates: &[StreamUpdate],
) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    write_stream(&mut w, meta, updates)?;
    Ok(())
}

fn parse_header_comment(line: &str) -> Option<StreamMeta> {
    let mut n = None;
    let mut max_update = None;
    for token in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = token.strip_prefix("n=") {
            n = v.parse::<u64>().ok();
        } else if let Some(v) = token.strip_prefix("max-update=") {
            max_update = v.parse::<i64>().ok();
        }
    }
    match (n, max_update) {
        (Some(n), Some(max_update)) if n >= 1 && max_update >= 1 => {
            Some(StreamMeta { n, max_update })
        }
        _ => None,
    }
}

/// Parses a stream, validating every update against the header bounds.
pub fn read_stream(reader: impl BufRead) -> Result<(StreamMeta, Vec<StreamUpdate>), Error> {
    let mut meta: Option<StreamMeta> = None;
    let mut updates = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if meta.is_none() {
                meta = parse_header_comment(trimmed);
            }
            continue;
        }
        let meta = meta.ok_or(Error::Parse {
            line: line_no,
            message: "update before '# n=<n> max-update=<M>' header".into(),
        })?;
        let mut parts = trimmed.split_whitespace();
        let item = parts
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected unsigned item index".into(),
            })?;
        let delta = parts
            .next()
            .and_then(|t| t.parse::<i64>().ok())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected signed increment".into(),
            })?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "trailing tokens after 'i v'".into(),
            });
        }
        if item >= meta.n {
            return Err(Error::Parse {
                line: line_no,
                message: format!("item {item} outside [0, {})", meta.n),
            });
        }
        if delta == 0 || delta.unsigned_abs() > meta.max_update.unsigned_abs() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("increment {delta} outside ±{} \\ {{0}}", meta.max_update),
            });
        }
        updates.push(StreamUpdate { item, delta });
    }
    let meta = meta.ok_or(Error::Parse {
        line: 0,
        message: "missing '# n=<n> max-update=<M>' header".into(),
    })?;
    Ok((meta, updates))
}

pub fn read_stream_file(path: &Path) -> Result<(StreamMeta, Vec<StreamUpdate>), Error> {
    read_stream(BufReader::new(File::open(path)?))
}
