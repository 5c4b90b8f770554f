//! Summary statistics over bootstrap and rarefaction draws.

use serde::Serialize;

/// Point value with a percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    /// Standard deviation of the draws behind the interval.
    pub sd: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Arithmetic mean; constant inputs return their value exactly.
pub fn mean(xs: &[f64]) -> f64 {
    match xs.first() {
        Some(&first) if xs.iter().all(|&x| x == first) => first,
        _ => xs.iter().sum::<f64>() / xs.len() as f64,
    }
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central percentile interval at `level`.
pub fn percentile_interval(xs: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (
        quantile_sorted(&sorted, tail),
        quantile_sorted(&sorted, 1.0 - tail),
    )
}

/// Mean of the draws with their percentile interval. `xs` must be nonempty.
pub fn summarize(xs: &[f64], level: f64) -> Estimate {
    let (lo, hi) = percentile_interval(xs, level);
    Estimate {
        point: mean(xs),
        lo,
        hi,
        sd: std_dev(xs),
    }
}
