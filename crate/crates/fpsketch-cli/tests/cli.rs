//! End-to-end checks of the binary: exit codes, determinism, the committed
//! golden report, and stream-file round trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpsketch"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn generate_is_deterministic() {
    let dir = std::env::temp_dir().join("fpsketch-cli-det");
    std::fs::create_dir_all(&dir).unwrap();
    let a = dir.join("a.stream");
    let b = dir.join("b.stream");
    for out in [&a, &b] {
        let res = run_in(
            &dir,
            &[
                "generate",
                "--dist",
                "zipf",
                "--alpha",
                "1.1",
                "--n",
                "500",
                "--m",
                "20000",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap(),
            ],
        );
        assert!(res.status.success(), "{res:?}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn estimate_matches_committed_golden_report() {
    let out = run_in(
        &fixtures(),
        &[
            "estimate",
            "--stream",
            "zipf_small.stream",
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "7",
            "--scale-b",
            "0.01",
            "--scale-s",
            "0.000434",
            "--scale-k",
            "0.00694",
            "--with-oracle",
        ],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let golden = std::fs::read_to_string(fixtures().join("estimate_golden.txt")).unwrap();
    assert_eq!(stdout_of(&out), golden);
}

#[test]
fn exact_mode_reports_the_oracle_moment() {
    let out = run_in(
        &fixtures(),
        &[
            "estimate",
            "--stream",
            "zipf_small.stream",
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "7",
            "--exact",
        ],
    );
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("mode exact"));
    assert!(text.contains("exact_fp "));
    assert!(!text.contains("theta "));
}

#[test]
fn empty_stream_estimates_zero() {
    let dir = std::env::temp_dir().join("fpsketch-cli-empty");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("empty.stream");
    let res = run_in(
        &dir,
        &[
            "generate",
            "--dist",
            "uniform",
            "--n",
            "256",
            "--m",
            "0",
            "--max-update",
            "3",
            "--seed",
            "1",
            "--out",
            path.to_str().unwrap(),
        ],
    );
    assert!(res.status.success());
    let out = run_in(
        &dir,
        &[
            "estimate",
            "--stream",
            path.to_str().unwrap(),
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "2",
            "--scale-b",
            "0.01",
            "--scale-s",
            "0.000434",
            "--scale-k",
            "0.00694",
        ],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout_of(&out).contains("theta 0\n"), "{}", stdout_of(&out));
}

#[test]
fn benchmark_reports_success_rate() {
    let out = run_in(
        &fixtures(),
        &[
            "benchmark",
            "--stream",
            "zipf_small.stream",
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "3",
            "--trials",
            "2",
            "--scale-b",
            "0.01",
            "--scale-s",
            "0.000434",
            "--scale-k",
            "0.00694",
        ],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout_of(&out);
    let rate: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("success_rate "))
        .expect("success_rate line")
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(text.contains("trials 2"));
    assert!(text.contains("wall_time_seconds "));
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // configuration rejection: p must exceed 2
    let out = run_in(
        &fixtures(),
        &[
            "estimate",
            "--stream",
            "zipf_small.stream",
            "--p",
            "2",
            "--epsilon",
            "0.5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    // even copy counts are rejected
    let out = run_in(
        &fixtures(),
        &[
            "estimate",
            "--stream",
            "zipf_small.stream",
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "1",
            "--copies",
            "2",
            "--scale-b",
            "0.01",
            "--scale-s",
            "0.000434",
            "--scale-k",
            "0.00694",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn io_errors_exit_two() {
    let out = run_in(
        &fixtures(),
        &[
            "estimate",
            "--stream",
            "no-such-file.stream",
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));

    let dir = std::env::temp_dir().join("fpsketch-cli-bad");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.stream");
    std::fs::write(&bad, "# n=10 max-update=1\n3 1\nnonsense\n").unwrap();
    let out = run_in(
        &dir,
        &[
            "estimate",
            "--stream",
            bad.to_str().unwrap(),
            "--p",
            "3",
            "--epsilon",
            "0.5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn zipf_head_matches_harmonic_prediction() {
    // Top-rank frequency of a generated stream tracks m / H_{n,alpha}.
    let dir = std::env::temp_dir().join("fpsketch-cli-zipf");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("zipf_big.stream");
    let (n, m, alpha) = (10_000u64, 1_000_000u64, 1.1f64);
    let res = run_in(
        &dir,
        &[
            "generate",
            "--dist",
            "zipf",
            "--alpha",
            "1.1",
            "--n",
            "10000",
            "--m",
            "1000000",
            "--seed",
            "5",
            "--out",
            path.to_str().unwrap(),
        ],
    );
    assert!(res.status.success());
    let (meta, updates) = fpsketch::stream::read_stream_file(&path).unwrap();
    assert_eq!(meta.n, n);
    let fv = fpsketch::oracle::FrequencyVector::from_updates(n, &updates);
    let top = (0..n).map(|i| fv.count(i)).max().unwrap() as f64;
    let harmonic: f64 = (1..=n).map(|k| (k as f64).powf(-alpha)).sum();
    let expected = m as f64 / harmonic;
    assert!(
        (top - expected).abs() / expected < 0.10,
        "top {top} vs {expected}"
    );
}
