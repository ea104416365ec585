//! Command-line driver: stream generation, single-shot estimation, and
//! Monte-Carlo benchmarking.
//!
//! Exit codes: 0 success, 1 usage/configuration, 2 I/O or parse failure,
//! 3 internal invariant violation (panic).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use fpsketch::fp::{median_estimate, FpConfig, FpScales, FpSketch};
use fpsketch::oracle::{run_trials, FrequencyVector};
use fpsketch::stream::{
    generate, read_stream_file, write_stream_file, StreamKind, StreamMeta, StreamUpdate,
};
use fpsketch::Error;

#[derive(Parser)]
#[command(name = "fpsketch", version, about = "Streaming F_p moment estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Dist {
    Zipf,
    Uniform,
    SingleHeavy,
}

#[derive(Args)]
struct GeneratorArgs {
    /// Synthetic stream shape.
    #[arg(long, value_enum)]
    dist: Dist,
    /// Zipf exponent (rank weight ∝ rank^-alpha).
    #[arg(long, default_value_t = 1.1)]
    alpha: f64,
    /// Domain size; items are 0-based indices below n.
    #[arg(long)]
    n: u64,
    /// Number of updates.
    #[arg(long)]
    m: u64,
    /// Bound on |v| per update.
    #[arg(long, default_value_t = 1)]
    max_update: i64,
}

impl GeneratorArgs {
    fn kind(&self) -> StreamKind {
        match self.dist {
            Dist::Zipf => StreamKind::Zipf { alpha: self.alpha },
            Dist::Uniform => StreamKind::Uniform,
            Dist::SingleHeavy => StreamKind::SingleHeavy,
        }
    }
}

#[derive(Args)]
struct ScaleArgs {
    /// Multiplier on the derived heavy-hitter budget B.
    #[arg(long, default_value_t = 1.0)]
    scale_b: f64,
    /// Multiplier on the derived table count s.
    #[arg(long, default_value_t = 1.0)]
    scale_s: f64,
    /// Multiplier on the derived Taylor degree k.
    #[arg(long, default_value_t = 1.0)]
    scale_k: f64,
    /// Multiplier on the derived averaging group count r.
    #[arg(long, default_value_t = 1.0)]
    scale_r: f64,
}

impl ScaleArgs {
    fn scales(&self) -> FpScales {
        FpScales {
            b: self.scale_b,
            s: self.scale_s,
            k: self.scale_k,
            r: self.scale_r,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic synthetic stream file.
    Generate {
        #[command(flatten)]
        gen: GeneratorArgs,
        #[arg(long)]
        seed: u64,
        /// Output path for the stream file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate F_p over a stream file (single sketch or median of copies).
    Estimate {
        /// Stream file path.
        #[arg(long)]
        stream: PathBuf,
        /// Domain-size override (defaults to the stream header).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        /// Independent sketch copies; the median Θ is reported. Must be odd.
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[command(flatten)]
        scale: ScaleArgs,
        /// Also compute the exact F_p and the relative error.
        #[arg(long)]
        with_oracle: bool,
        /// Skip sketching; report the exact F_p from the brute-force oracle.
        #[arg(long)]
        exact: bool,
    },
    /// Run seeded trials against the exact oracle and report the success rate.
    Benchmark {
        /// Stream file path (alternative: an inline generator via --dist).
        #[arg(long, conflicts_with = "dist")]
        stream: Option<PathBuf>,
        #[command(flatten)]
        gen: InlineGenerator,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[command(flatten)]
        scale: ScaleArgs,
    },
}

/// Generator flags for `benchmark`, optional as a group.
#[derive(Args)]
struct InlineGenerator {
    #[arg(long, value_enum)]
    dist: Option<Dist>,
    #[arg(long, default_value_t = 1.1)]
    alpha: f64,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long, default_value_t = 1)]
    max_update: i64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(report)) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Premise(_) | Error::Mismatch(_) => 1,
                Error::Parse { .. } | Error::Io(_) => 2,
            };
            ExitCode::from(code)
        }
        // The panic handler has already written the message to stderr.
        Err(_) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Generate { gen, seed, out } => cmd_generate(gen, seed, out),
        Command::Estimate {
            stream,
            n,
            p,
            epsilon,
            seed,
            copies,
            scale,
            with_oracle,
            exact,
        } => cmd_estimate(
            stream,
            n,
            p,
            epsilon,
            seed,
            copies,
            scale.scales(),
            with_oracle,
            exact,
        ),
        Command::Benchmark {
            stream,
            gen,
            p,
            epsilon,
            seed,
            trials,
            scale,
        } => cmd_benchmark(stream, gen, p, epsilon, seed, trials, scale.scales()),
    }
}

fn cmd_generate(gen: GeneratorArgs, seed: u64, out: PathBuf) -> Result<String, Error> {
    if gen.n < 1 {
        return Err(Error::Config("generator needs n >= 1".into()));
    }
    if matches!(gen.dist, Dist::Uniform) && gen.max_update < 1 {
        return Err(Error::Config(
            "uniform generator needs max_update >= 1".into(),
        ));
    }
    let (meta, updates) = generate(gen.kind(), gen.n, gen.m, gen.max_update, seed);
    write_stream_file(&out, meta, &updates)?;
    let mut report = String::new();
    let _ = writeln!(report, "command generate");
    let _ = writeln!(report, "out {}", out.display());
    let _ = writeln!(report, "n {}", meta.n);
    let _ = writeln!(report, "m {}", updates.len());
    let _ = writeln!(report, "max_update {}", meta.max_update);
    let _ = writeln!(report, "seed {seed}");
    Ok(report)
}

fn load_stream(
    path: &Path,
    n_override: Option<u64>,
) -> Result<(StreamMeta, Vec<StreamUpdate>), Error> {
    let (mut meta, updates) = read_stream_file(path)?;
    if let Some(n) = n_override {
        if let Some(bad) = updates.iter().find(|u| u.item >= n) {
            return Err(Error::Config(format!(
                "--n {n} is below stream item {}",
                bad.item
            )));
        }
        meta.n = n;
    }
    Ok((meta, updates))
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    stream: PathBuf,
    n_override: Option<u64>,
    p: f64,
    epsilon: f64,
    seed: u64,
    copies: usize,
    scales: FpScales,
    with_oracle: bool,
    exact: bool,
) -> Result<String, Error> {
    let (meta, updates) = load_stream(&stream, n_override)?;
    let mut report = String::new();
    let _ = writeln!(report, "command estimate");
    let _ = writeln!(report, "stream {}", stream.display());
    let _ = writeln!(report, "n {}", meta.n);
    let _ = writeln!(report, "updates {}", updates.len());
    let _ = writeln!(report, "p {p}");
    let _ = writeln!(report, "epsilon {epsilon}");
    let _ = writeln!(report, "seed {seed}");

    if exact {
        let fv = FrequencyVector::from_updates(meta.n, &updates);
        let _ = writeln!(report, "mode exact");
        let _ = writeln!(report, "exact_fp {}", fv.moment(p));
        return Ok(report);
    }

    let config = FpConfig::derive(meta.n, p, epsilon, scales, seed)?;
    let m = updates.len() as u64;
    let bits = config.counter_bits_required(m, meta.max_update.unsigned_abs());
    if bits >= 63.0 {
        return Err(Error::Config(format!(
            "stream needs {bits:.0}-bit counters (limit 63); rerun with --exact"
        )));
    }
    let _ = writeln!(report, "mode sketch");
    let _ = writeln!(report, "copies {copies}");
    let _ = writeln!(report, "tables {}", config.tables);
    let _ = writeln!(report, "buckets {}", config.buckets);
    let _ = writeln!(report, "b {}", config.b);
    let _ = writeln!(report, "taylor_degree {}", config.taylor_degree);
    let _ = writeln!(report, "taylor_groups {}", config.taylor_groups);
    let _ = writeln!(report, "frac_bits {}", config.frac_bits);
    let _ = writeln!(report, "counters {}", config.counter_count());
    let _ = writeln!(report, "memory_bytes {}", config.memory_bytes());

    let theta;
    if copies == 1 {
        let mut sketch = FpSketch::new(config)?;
        sketch.ingest_stream(&updates);
        let trace = sketch.query();
        theta = trace.theta;
        let _ = writeln!(report, "theta {}", trace.theta);
        let _ = writeln!(report, "nc_failed {}", trace.nc_failed);
        let _ = writeln!(report, "heavy_candidates {}", trace.items.len());
    } else {
        let med = median_estimate(&config, &updates, copies)?;
        theta = med.theta;
        let _ = writeln!(report, "theta {}", med.theta);
        let _ = writeln!(report, "nc_failures {}", med.nc_failures);
        let _ = writeln!(report, "all_failed {}", med.all_failed);
    }

    if with_oracle {
        let fv = FrequencyVector::from_updates(meta.n, &updates);
        let exact_fp = fv.moment(p);
        let _ = writeln!(report, "exact_fp {exact_fp}");
        if exact_fp > 0.0 {
            let _ = writeln!(
                report,
                "relative_error {}",
                (theta - exact_fp).abs() / exact_fp
            );
        }
    }
    Ok(report)
}

fn cmd_benchmark(
    stream: Option<PathBuf>,
    gen: InlineGenerator,
    p: f64,
    epsilon: f64,
    seed: u64,
    trials: u64,
    scales: FpScales,
) -> Result<String, Error> {
    if trials < 1 {
        return Err(Error::Config("benchmark needs at least one trial".into()));
    }
    let (meta, updates, source) = match (stream, gen.dist) {
        (Some(path), None) => {
            let (meta, updates) = load_stream(&path, None)?;
            let source = path.display().to_string();
            (meta, updates, source)
        }
        (None, Some(dist)) => {
            let (n, m) = match (gen.n, gen.m) {
                (Some(n), Some(m)) => (n, m),
                _ => return Err(Error::Config("inline generation needs --n and --m".into())),
            };
            let kind = GeneratorArgs {
                dist,
                alpha: gen.alpha,
                n,
                m,
                max_update: gen.max_update,
            };
            let (meta, updates) = generate(kind.kind(), n, m, gen.max_update, seed);
            (meta, updates, format!("generated:{dist:?}"))
        }
        _ => {
            return Err(Error::Config(
                "benchmark needs exactly one of --stream or --dist".into(),
            ))
        }
    };

    let config = FpConfig::derive(meta.n, p, epsilon, scales, seed)?;
    let fv = FrequencyVector::from_updates(meta.n, &updates);
    let exact_fp = fv.moment(p);

    let start = Instant::now();
    let result = run_trials(&config, &updates, trials, |outcome| {
        (outcome.theta - exact_fp).abs() <= epsilon * exact_fp
    });
    let wall = start.elapsed().as_secs_f64();

    let mean_rel: f64 = if exact_fp > 0.0 {
        result
            .outcomes
            .iter()
            .map(|o| (o.theta - exact_fp).abs() / exact_fp)
            .sum::<f64>()
            / trials as f64
    } else {
        0.0
    };

    let mut report = String::new();
    let _ = writeln!(report, "command benchmark");
    let _ = writeln!(report, "stream {source}");
    let _ = writeln!(report, "n {}", meta.n);
    let _ = writeln!(report, "updates {}", updates.len());
    let _ = writeln!(report, "p {p}");
    let _ = writeln!(report, "epsilon {epsilon}");
    let _ = writeln!(report, "seed {seed}");
    let _ = writeln!(report, "trials {trials}");
    let _ = writeln!(report, "counters {}", config.counter_count());
    let _ = writeln!(report, "exact_fp {exact_fp}");
    let _ = writeln!(report, "success_rate {}", result.success_rate());
    let _ = writeln!(report, "mean_theta {}", result.mean);
    let _ = writeln!(report, "variance_theta {}", result.variance);
    let _ = writeln!(report, "mean_relative_error {mean_rel}");
    let _ = writeln!(
        report,
        "nc_failure_rate {}",
        result.nc_failures as f64 / trials as f64
    );
    let _ = writeln!(report, "wall_time_seconds {wall:.3}");
    Ok(report)
}
