//! Exact brute-force references and the seeded Monte-Carlo trial harness.
//!
//! The oracle deliberately violates the streaming constraint: it stores the
//! dense frequency vector and computes moments and heavy sets exactly, so
//! every statistical property of the sketches can be checked against ground
//! truth.

use crate::accum::Neumaier;
use crate::fp::{FpConfig, FpSketch, QueryTrace, TAG_TRIAL};
use crate::rng::derive_seed;
use crate::stream::StreamUpdate;

/// Dense exact frequency vector with ingest statistics.
#[derive(Clone, Debug)]
pub struct FrequencyVector {
    counts: Vec<i64>,
    num_updates: u64,
    max_abs_update: i64,
}

impl FrequencyVector {
    pub fn new(n: u64) -> Self {
        assert!(
            n as usize as u64 == n,
            "oracle domain {n} exceeds addressable memory"
        );
        FrequencyVector {
            counts: vec![0; n as usize],
            num_updates: 0,
            max_abs_update: 0,
        }
    }

    pub fn from_updates(n: u64, updates: &[StreamUpdate]) -> Self {
        let mut fv = FrequencyVector::new(n);
        for u in updates {
            fv.update(u.item, u.delta);
        }
        fv
    }

    pub fn update(&mut self, item: u64, delta: i64) {
        self.counts[item as usize] += delta;
        self.num_updates += 1;
        self.max_abs_update = self.max_abs_update.max(delta.abs());
    }

    pub fn n(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn count(&self, item: u64) -> i64 {
        self.counts[item as usize]
    }

    /// Number of records seen (the stream length m).
    pub fn num_updates(&self) -> u64 {
        self.num_updates
    }

    /// Largest |v| seen (the update magnitude M).
    pub fn max_abs_update(&self) -> i64 {
        self.max_abs_update
    }

    /// Exact `F_p = Σ |f_i|^p`, compensated accumulation.
    pub fn moment(&self, p: f64) -> f64 {
        assert!(p > 0.0, "moment order must be positive");
        let mut acc = Neumaier::new();
        for &f in &self.counts {
            if f != 0 {
                acc.add((f.unsigned_abs() as f64).powf(p));
            }
        }
        acc.value()
    }

    /// Exact heavy set of the rescaled stream: `{i : |f_i·y_i| ≥ threshold}`.
    pub fn heavy_items(&self, scaler: impl Fn(u64) -> f64, threshold: f64) -> Vec<u64> {
        (0..self.n())
            .filter(|&i| {
                let f = self.count(i);
                f != 0 && (f.abs() as f64 * scaler(i)) >= threshold
            })
            .collect()
    }
}

/// Outcome of one seeded trial.
#[derive(Clone, Copy, Debug)]
pub struct TrialOutcome {
    pub trial: u64,
    pub master_seed: u64,
    pub theta: f64,
    pub nc_failed: bool,
}

/// Aggregate over a batch of trials.
#[derive(Clone, Debug)]
pub struct TrialReport {
    pub trials: u64,
    pub successes: u64,
    pub mean: f64,
    pub variance: f64,
    pub nc_failures: u64,
    pub outcomes: Vec<TrialOutcome>,
}

impl TrialReport {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Runs `trials` independent sketches of `stream` (trial seeds derived from
/// `config.master_seed`) and maps each query trace through `map`.
///
/// Trials are distributed over the available cores in contiguous chunks;
/// results are ordered by trial index, so the output does not depend on the
/// thread count. Same config, stream and trial count ⇒ identical output.
pub fn run_trials_map<T: Send>(
    config: &FpConfig,
    stream: &[StreamUpdate],
    trials: u64,
    map: impl Fn(u64, &QueryTrace) -> T + Sync,
) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get() as u64);
    let workers = workers.min(trials.max(1));

    let run_one = |trial: u64| -> T {
        let mut cfg = config.clone();
        cfg.master_seed = derive_seed(config.master_seed, TAG_TRIAL, trial);
        let mut sketch = FpSketch::new(cfg).expect("trial config was validated by the caller");
        sketch.ingest_stream(stream);
        let trace = sketch.query();
        map(trial, &trace)
    };

    if workers <= 1 {
        return (0..trials).map(run_one).collect();
    }
    let chunk = trials.div_ceil(workers);
    let mut chunks: Vec<Vec<T>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run_one = &run_one;
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(trials);
                scope.spawn(move || (lo..hi).map(run_one).collect::<Vec<T>>())
            })
            .collect();
        for h in handles {
            chunks.push(h.join().expect("trial worker panicked"));
        }
    });
    chunks.into_iter().flatten().collect()
}

/// Runs seeded trials and scores each one with `predicate`.
pub fn run_trials(
    config: &FpConfig,
    stream: &[StreamUpdate],
    trials: u64,
    predicate: impl Fn(&TrialOutcome) -> bool + Sync,
) -> TrialReport {
    assert!(trials >= 1, "need at least one trial");
    let outcomes: Vec<TrialOutcome> =
        run_trials_map(config, stream, trials, |trial, trace| TrialOutcome {
            trial,
            master_seed: derive_seed(config.master_seed, TAG_TRIAL, trial),
            theta: trace.theta,
            nc_failed: trace.nc_failed,
        });
    let successes = outcomes.iter().filter(|o| predicate(o)).count() as u64;
    let nc_failures = outcomes.iter().filter(|o| o.nc_failed).count() as u64;
    let thetas: Vec<f64> = outcomes.iter().map(|o| o.theta).collect();
    let (mean, variance) = crate::accum::mean_and_variance(&thetas);
    TrialReport {
        trials,
        successes,
        mean,
        variance,
        nc_failures,
        outcomes,
    }
}

/// Key/value summary lines, the machine-readable trial report.
pub fn format_report(report: &TrialReport) -> String {
    format!(
        "trials {}\nsuccesses {}\nsuccess_rate {}\nmean {}\nvariance {}\nnc_failures {}\n",
        report.trials,
        report.successes,
        report.success_rate(),
        report.mean,
        report.variance,
        report.nc_failures
    )
}
