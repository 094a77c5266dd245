use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// An empirical probability with its 95% Wilson interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub n: usize,
    pub prob: f64,
    pub lo: f64,
    pub hi: f64,
    pub trials: u64,
    pub count: u64,
}

impl TailPoint {
    pub fn new(n: usize, count: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(count, trials, Z95);
        TailPoint {
            n,
            prob: count as f64 / trials as f64,
            lo,
            hi,
            trials,
            count,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}
