//! Running moments, blocking analysis and small weighted fits.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A value with a one-standard-deviation statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    /// Whether `other` lies within `k` standard deviations of this estimate.
    pub fn within(&self, other: f64, k: f64) -> bool {
        (self.value - other).abs() <= k * self.error
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", self.value, self.error)
    }
}

/// Welford accumulator for mean and centred second moment.
///
/// Merging follows Chan et al.; merging in a fixed order gives bitwise
/// reproducible results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let na = self.count as f64;
        let nb = other.count as f64;
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (denominator n).
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }
}

/// Mean and standard error of a set of block means: `std(means)/sqrt(n)`
/// with the unbiased (n − 1) standard deviation.
pub fn block_estimate(means: &[f64]) -> Estimate {
    let n = means.len();
    if n == 0 {
        return Estimate::new(f64::NAN, f64::NAN);
    }
    let mean = means.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate::new(mean, f64::INFINITY);
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate::new(mean, (var / n as f64).sqrt())
}

/// Splits a time series into `n_blocks` contiguous blocks (dropping the
/// remainder at the start) and returns the block means.
pub fn block_means(series: &[f64], n_blocks: usize) -> Vec<f64> {
    assert!(n_blocks >= 1);
    let size = series.len() / n_blocks;
    if size == 0 {
        return series.to_vec();
    }
    let skip = series.len() - size * n_blocks;
    series[skip..].chunks(size).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// One level of a reblocking (Flyvbjerg–Petersen) analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReblockLevel {
    pub block_size: usize,
    pub n_blocks: usize,
    pub error: f64,
}

/// Repeatedly pairs neighbouring blocks and reports the standard error at
/// each block size. Stops when fewer than `min_blocks` blocks remain.
pub fn reblock(series: &[f64], min_blocks: usize) -> Vec<ReblockLevel> {
    let mut levels = Vec::new();
    let mut current = series.to_vec();
    let mut size = 1;
    while current.len() >= min_blocks.max(2) {
        levels.push(ReblockLevel { block_size: size, n_blocks: current.len(), error: block_estimate(&current).error });
        current = current.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        size *= 2;
    }
    levels
}

/// Ratio of the error after one pairwise merge of the given block means to
/// the error at the original blocking. Values near 1 indicate blocks longer
/// than the autocorrelation time. `None` when there are too few blocks.
pub fn blocking_convergence(means: &[f64]) -> Option<f64> {
    if means.len() < 8 {
        return None;
    }
    let merged: Vec<f64> = means.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let base = block_estimate(means).error;
    if base == 0.0 {
        return Some(1.0);
    }
    Some(block_estimate(&merged).error / base)
}

/// Weighted straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: Estimate,
    pub slope: Estimate,
    pub covariance: f64,
    pub chi2: f64,
}

/// Weighted least squares with weights `1/σ²`. Zero errors everywhere fall
/// back to unit weights. Returns `None` when all `x` coincide.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Option<LinearFit> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), sigma.len());
    if x.len() < 2 {
        return None;
    }
    let unit = sigma.iter().all(|&s| s <= 0.0);
    let w: Vec<f64> = sigma.iter().map(|&s| if unit { 1.0 } else { 1.0 / (s * s) }).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let s: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = s * sxx - sx * sx;
    let spread = x.iter().fold(0.0_f64, |m, xi| m.max((xi - x[0]).abs()));
    if spread == 0.0 || det <= 0.0 {
        return None;
    }
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (s * sxy - sx * sy) / det;
    let chi2: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (y - intercept - slope * x).powi(2)).sum();
    // Unit weights carry no error information; scale by the residual variance.
    let scale = if unit && x.len() > 2 {
        chi2 / (x.len() - 2) as f64
    } else if unit {
        0.0
    } else {
        1.0
    };
    Some(LinearFit {
        intercept: Estimate::new(intercept, (scale * sxx / det).sqrt()),
        slope: Estimate::new(slope, (scale * s / det).sqrt()),
        covariance: -scale * sx / det,
        chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 2.5, -3.0, 4.25, 0.5];
        let mut st = RunningStats::new();
        xs.iter().for_each(|&x| st.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((st.mean() - mean).abs() < 1e-15);
        assert!((st.variance() - var).abs() < 1e-14);
    }

    #[test]
    fn constant_series_has_zero_variance() {
        let mut st = RunningStats::new();
        for _ in 0..1000 {
            st.push(-0.5);
        }
        assert_eq!(st.variance(), 0.0);
    }

    #[test]
    fn block_estimate_definition() {
        let e = block_estimate(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        let sd = (5.0_f64 / 3.0).sqrt();
        assert!((e.error - sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.01, 0.02, 0.04];
        let y: Vec<f64> = x.iter().map(|t| -0.5 + 0.3 * t).collect();
        let fit = weighted_linear_fit(&x, &y, &[1e-3; 3]).unwrap();
        assert!((fit.intercept.value + 0.5).abs() < 1e-12);
        assert!((fit.slope.value - 0.3).abs() < 1e-9);
    }

    #[test]
    fn linear_fit_rejects_identical_x() {
        assert!(weighted_linear_fit(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0], &[1.0; 3]).is_none());
    }

    #[test]
    fn reblock_white_noise_is_flat() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..1 << 14).map(|_| rng.random::<f64>()).collect();
        let levels = reblock(&xs, 32);
        let first = levels[0].error;
        for l in &levels {
            assert!((l.error / first - 1.0).abs() < 0.25, "{l:?}");
        }
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in proptest::collection::vec(-1e3..1e3f64, 1..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let mut all = RunningStats::new();
            xs.iter().for_each(|&x| all.push(x));
            let mut a = RunningStats::new();
            let mut b = RunningStats::new();
            xs[..split].iter().for_each(|&x| a.push(x));
            xs[split..].iter().for_each(|&x| b.push(x));
            a.merge(&b);
            prop_assert!((a.mean() - all.mean()).abs() <= 1e-9 * (1.0 + all.mean().abs()));
            prop_assert!((a.variance() - all.variance()).abs() <= 1e-7 * (1.0 + all.variance()));
        }
    }
}
