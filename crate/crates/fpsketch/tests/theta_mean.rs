//! Mean-of-Θ check: over many seeded trials on a stream with a few dominant
//! items, the average estimate must land within 5% of the exact moment. This
//! exercises the full reweighting path (retention levels, tail probabilities,
//! Taylor readings) rather than per-trial accuracy.

use fpsketch::fp::FpConfig;
use fpsketch::oracle::{run_trials, FrequencyVector};
use fpsketch::stream::StreamUpdate;

#[test]
fn theta_is_unbiased_over_seeds() {
    let n = 1024u64;
    let plants: &[(u64, i64)] = &[(10, 450), (20, 700), (30, 1000), (40, 1500), (50, 2600)];
    let mut stream: Vec<StreamUpdate> = plants
        .iter()
        .map(|&(item, delta)| StreamUpdate { item, delta })
        .collect();
    for i in 0..n {
        if !plants.iter().any(|&(item, _)| item == i) {
            stream.push(StreamUpdate { item: i, delta: 10 });
        }
    }
    let exact_fp = FrequencyVector::from_updates(n, &stream).moment(3.0);

    let config = FpConfig {
        n,
        p: 3.0,
        epsilon: 0.5,
        master_seed: 2024,
        tables: 4,
        buckets: 65_536,
        b: 519,
        taylor_degree: 2,
        taylor_groups: 24,
        frac_bits: 14,
        f2_tables: 9,
        f2_buckets: 4096,
    };

    let trials = 400u64;
    let report = run_trials(&config, &stream, trials, |_| true);
    let gap = (report.mean - exact_fp).abs() / exact_fp;
    println!(
        "mean theta {} vs exact {exact_fp} (gap {gap:.4}, std of mean {:.3e})",
        report.mean,
        (report.variance / trials as f64).sqrt()
    );
    assert_eq!(report.nc_failures, 0);
    assert!(gap <= 0.05, "mean gap {gap}");
}
