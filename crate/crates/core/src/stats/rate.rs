use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::interval::{TailPoint, Z95};
use crate::error::{Error, Result};

/// Least-squares fit of `log |mean - haar| = log C - eta n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub eta_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
    /// 95% Student-t interval for `eta`.
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RateOutcome {
    Fit(RateFit),
    /// Fewer than three leading points stand above the `2 stderr` noise
    /// floor; `floor_n` is the first step below it.
    FloorReached { n_min: usize, floor_n: Option<usize>, signal_points: usize },
}

/// One row of an estimate series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Points whose error `|mean - haar|` exceeds this many standard errors are signal.
pub const SIGNAL_SE: f64 = 2.0;

/// Fits the decay of `|mean - haar_mean|` over the leading run of points that
/// stand above the noise floor, in order of increasing `n`.
pub fn estimate_rate(series: &[SeriesPoint], haar_mean: f64) -> Result<RateOutcome> {
    if series.is_empty() {
        return Err(Error::Empty("rate fit needs a series"));
    }
    let mut pts = series.to_vec();
    pts.sort_by_key(|p| p.n);
    let mut signal = Vec::new();
    let mut floor_n = None;
    for p in &pts {
        let err = (p.mean - haar_mean).abs();
        if err > SIGNAL_SE * p.stderr && err > 0.0 {
            signal.push((p.n as f64, err.ln()));
        } else {
            floor_n = Some(p.n);
            break;
        }
    }
    if signal.len() < 3 {
        return Ok(RateOutcome::FloorReached {
            n_min: pts[0].n,
            floor_n,
            signal_points: signal.len(),
        });
    }
    let line = ols(&signal);
    let m = signal.len() as f64;
    let t = StudentsT::new(0.0, 1.0, m - 2.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t * line.slope_se;
    let eta = -line.slope;
    Ok(RateOutcome::Fit(RateFit {
        eta_hat: eta,
        c_hat: line.intercept.exp(),
        r2: line.r2,
        eta_lo: eta - half,
        eta_hi: eta + half,
        n_min: signal[0].0 as usize,
        n_max: signal[signal.len() - 1].0 as usize,
        points: signal.len(),
    }))
}

struct Line {
    slope: f64,
    intercept: f64,
    r2: f64,
    slope_se: f64,
}

fn ols(xy: &[(f64, f64)]) -> Line {
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if m > 2.0 { (sse / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
    Line {
        slope,
        intercept,
        r2,
        slope_se,
    }
}

/// Weighted fit of `log p = a + b n` over points with a nonzero count, with
/// the delta-method variance `(1 - p) / (N p)` of `log p` taken as known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% normal interval for the slope.
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub points: usize,
}

pub fn fit_log_tail(points: &[TailPoint]) -> Option<SlopeFit> {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.count > 0)
        .map(|p| {
            let var = (1.0 - p.prob) / (p.trials as f64 * p.prob);
            // A tail of exactly 1 has zero delta-method variance; cap the weight.
            let w = 1.0 / var.max(1.0 / p.trials as f64);
            (p.n as f64, p.prob.ln(), w)
        })
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let sw: f64 = usable.iter().map(|u| u.2).sum();
    let mx = usable.iter().map(|u| u.2 * u.0).sum::<f64>() / sw;
    let my = usable.iter().map(|u| u.2 * u.1).sum::<f64>() / sw;
    let sxx: f64 = usable.iter().map(|u| u.2 * (u.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = usable.iter().map(|u| u.2 * (u.0 - mx) * (u.1 - my)).sum();
    let slope = sxy / sxx;
    let se = (1.0 / sxx).sqrt();
    Some(SlopeFit {
        slope,
        intercept: my - slope * mx,
        slope_lo: slope - Z95 * se,
        slope_hi: slope + Z95 * se,
        points: usable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand::Rng;

    fn series(mut f: impl FnMut(usize) -> (f64, f64)) -> Vec<SeriesPoint> {
        (1..=20)
            .map(|n| {
                let (mean, stderr) = f(n);
                SeriesPoint { n, mean, stderr }
            })
            .collect()
    }

    #[test]
    fn exact_exponential() {
        let s = series(|n| (7.0 + 3.0 * (-0.2 * n as f64).exp(), 0.0));
        let RateOutcome::Fit(f) = estimate_rate(&s, 7.0).unwrap() else { panic!() };
        assert!((f.eta_hat - 0.2).abs() < 1e-10);
        assert!((f.c_hat - 3.0).abs() < 1e-9);
        assert!(f.r2 > 1.0 - 1e-9);
        assert_eq!((f.n_min, f.n_max, f.points), (1, 20, 20));
    }

    #[test]
    fn exact_fit_residual() {
        let xy: Vec<(f64, f64)> = (1..=10).map(|n| (n as f64, 1.5 - 0.3 * n as f64)).collect();
        let l = ols(&xy);
        let sse: f64 = xy.iter().map(|p| (p.1 - l.intercept - l.slope * p.0).powi(2)).sum();
        assert!(sse < 1e-9);
    }

    #[test]
    fn noisy_exponential() {
        let mut rng = stream(2, Domain::Sampler, 0, 0);
        let s = series(|n| {
            let noise = 1.0 + 0.05 * rng.random_range(-1.0..1.0);
            (-3.0 * (-0.2 * n as f64).exp() * noise, 1e-6)
        });
        let RateOutcome::Fit(f) = estimate_rate(&s, 0.0).unwrap() else { panic!() };
        assert!((0.18..=0.22).contains(&f.eta_hat), "{}", f.eta_hat);
        assert!(f.r2 > 0.95);
        assert!(f.eta_lo < f.eta_hat && f.eta_hat < f.eta_hi);
    }

    #[test]
    fn constant_series_reaches_floor() {
        let s = series(|_| (7.0, 0.1));
        assert_eq!(
            estimate_rate(&s, 7.0).unwrap(),
            RateOutcome::FloorReached { n_min: 1, floor_n: Some(1), signal_points: 0 }
        );
    }

    #[test]
    fn floor_after_two_signal_points() {
        let s = series(|n| (if n <= 2 { 10.0 } else { 7.05 }, 0.1));
        assert_eq!(
            estimate_rate(&s, 7.0).unwrap(),
            RateOutcome::FloorReached { n_min: 1, floor_n: Some(3), signal_points: 2 }
        );
    }

    #[test]
    fn student_t_interval_matches_tables() {
        // Three points, df = 1: t_{0.975} = 12.706.
        let s = vec![
            SeriesPoint { n: 1, mean: 1.0f64.exp(), stderr: 0.0 },
            SeriesPoint { n: 2, mean: 0.0f64.exp(), stderr: 0.0 },
            SeriesPoint { n: 3, mean: (-0.8f64).exp(), stderr: 0.0 },
        ];
        let RateOutcome::Fit(f) = estimate_rate(&s, 0.0).unwrap() else { panic!() };
        // Slope -0.9, residuals (-0.0333, 0.0667, -0.0333): se = sqrt(0.00667 / 2).
        let se = (0.02f64 / 3.0 / 1.0 / 2.0).sqrt();
        assert!((f.eta_hat - 0.9).abs() < 1e-12);
        assert!(((f.eta_hi - f.eta_lo) / 2.0 - 12.706 * se).abs() < 1e-3);
    }

    #[test]
    fn log_tail_slope() {
        let pts: Vec<TailPoint> = [(10usize, 20_000u64), (20, 2_000), (30, 200)]
            .iter()
            .map(|&(n, c)| TailPoint::new(n, c, 100_000))
            .collect();
        let f = fit_log_tail(&pts).unwrap();
        assert!((f.slope - (0.1f64).ln() / 10.0).abs() < 1e-3);
        assert!(f.slope_hi < 0.0);
        assert!(fit_log_tail(&pts[..1]).is_none());
        let zeros = vec![TailPoint::new(10, 0, 100), TailPoint::new(20, 0, 100)];
        assert!(fit_log_tail(&zeros).is_none());
    }
}
