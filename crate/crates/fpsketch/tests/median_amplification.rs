//! Median-of-copies amplification: with a deliberately under-provisioned
//! sketch the single-query success rate lands mid-range, and the median of 9
//! independent copies must beat it.

use fpsketch::fp::{median_estimate, FpConfig};
use fpsketch::oracle::{run_trials, FrequencyVector};
use fpsketch::rng::derive_seed;
use fpsketch::stream::{generate, StreamKind};

#[test]
fn median_of_nine_beats_single_queries() {
    let n = 4096u64;
    let epsilon = 0.2f64;
    let (_, updates) = generate(StreamKind::Zipf { alpha: 1.1 }, n, 200_000, 1, 4242);
    let fv = FrequencyVector::from_updates(n, &updates);
    let exact_fp = fv.moment(3.0);
    let f2 = fv.moment(2.0);

    // Aim the threshold near the second-ranked frequency so the retention
    // lottery dominates the error and single queries miss regularly.
    let t_target = 9000.0f64;
    let b = (16.0 * fpsketch::pareto::y_second_moment(3.0, n) * f2 / (t_target * t_target)).ceil();
    let config = FpConfig {
        n,
        p: 3.0,
        epsilon,
        master_seed: 4243,
        tables: 2,
        buckets: (1089.0 * b).ceil() as u64,
        b: b as u64,
        taylor_degree: 1,
        taylor_groups: 24,
        frac_bits: 16,
        f2_tables: 9,
        f2_buckets: 16_384,
    };

    let single = run_trials(&config, &updates, 100, |o| {
        (o.theta - exact_fp).abs() <= epsilon * exact_fp
    });
    let single_rate = single.success_rate();

    let med_trials = 50u64;
    let mut hits = 0u64;
    for t in 0..med_trials {
        let mut cfg = config.clone();
        cfg.master_seed = derive_seed(4244, 21, t);
        let med = median_estimate(&cfg, &updates, 9).unwrap();
        hits += u64::from((med.theta - exact_fp).abs() <= epsilon * exact_fp);
    }
    let median_rate = hits as f64 / med_trials as f64;

    println!("single rate {single_rate}, median-of-9 rate {median_rate}");
    assert!(
        single_rate > 0.30 && single_rate < 0.95,
        "single rate {single_rate} left the amplification-visible band; retune t_target"
    );
    assert!(
        median_rate > single_rate,
        "median-of-9 rate {median_rate} did not exceed single rate {single_rate}"
    );
}
