//! Compensated accumulation and small order statistics.

/// Neumaier's variant of Kahan summation.
///
/// Keeps a running compensation term so the accumulated sum behaves like an
/// extended-precision (~106-bit significand) accumulator regardless of term
/// count or cancellation order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Neumaier::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Lower median: element at index `⌊(len−1)/2⌋` of the sorted slice.
/// For odd lengths this is the true median. Reorders the slice.
pub fn lower_median_i64(values: &mut [i64]) -> i64 {
    assert!(!values.is_empty(), "median of empty slice");
    let idx = (values.len() - 1) / 2;
    *values.select_nth_unstable(idx).1
}

/// Lower median over f64 values (NaN-free input expected). Reorders the slice.
pub fn lower_median_f64(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let idx = (values.len() - 1) / 2;
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN in median input"));
    values[idx]
}

/// Sample mean and unbiased sample variance.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 1);
    let mut sum = Neumaier::new();
    for &v in values {
        sum.add(v);
    }
    let mean = sum.value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut sq = Neumaier::new();
    for &v in values {
        let d = v - mean;
        sq.add(d * d);
    }
    (mean, sq.value() / (n - 1) as f64)
}
