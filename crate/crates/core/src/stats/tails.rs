use serde::{Deserialize, Serialize};

use super::interval::TailPoint;
use super::rate::{fit_log_tail, SlopeFit};
use crate::error::{Error, Result};
use crate::measures::{DiagonalLawSpec, UnipotentLawSpec};
use crate::rng::{chunked, derive_seed, Domain};

/// Empirical tail probabilities over an `n` grid with a fitted log-linear decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub points: Vec<TailPoint>,
    pub slope: Option<SlopeFit>,
    /// Zero unipotent draws that were redrawn (growth curves only).
    pub resampled: u64,
}

impl TailCurve {
    fn new(points: Vec<TailPoint>, resampled: u64) -> Self {
        let slope = fit_log_tail(&points);
        TailCurve {
            points,
            slope,
            resampled,
        }
    }
}

fn check_grid(ns: &[usize], trials: u64) -> Result<()> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::InvalidArgument("n grid must be nonempty and positive".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Counts events over `trials` independent draws for each `n`, in parallel
/// chunks with a seed derived from `(seed, n)`.
fn count_events<F>(ns: &[usize], trials: u64, seed: u64, domain: Domain, event: F) -> Vec<(u64, u64)>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> (bool, u64) + Sync,
{
    ns.iter()
        .map(|&n| {
            chunked(trials, derive_seed(seed, n as u64), domain, |rng, len| {
                let mut hits = 0u64;
                let mut extra = 0u64;
                for _ in 0..len {
                    let (hit, e) = event(rng, n);
                    hits += hit as u64;
                    extra += e;
                }
                (hits, extra)
            })
            .into_iter()
            .fold((0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
        })
        .collect()
}

/// `P(|S_n / n - alpha_i| > eps)` for the sum `S_n` of log-coordinate `coord`
/// (0-based) over `n` independent diagonal samples.
pub fn chernoff_tail(
    law: &DiagonalLawSpec,
    coord: usize,
    eps: f64,
    ns: &[usize],
    trials: u64,
    seed: u64,
) -> Result<TailCurve> {
    check_grid(ns, trials)?;
    if coord >= law.dims().k0() {
        return Err(Error::InvalidArgument(format!("coordinate {coord} out of range")));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument("epsilon must be nonnegative".into()));
    }
    let rho = law.means()[coord];
    let counts = count_events(ns, trials, seed, Domain::Tails, |rng, n| {
        let mut s = 0.0;
        for _ in 0..n {
            s += law.sample(rng).log_entries()[coord];
        }
        ((s / n as f64 - rho).abs() > eps, 0)
    });
    let points = ns
        .iter()
        .zip(counts)
        .map(|(&n, (c, _))| TailPoint::new(n, c, trials))
        .collect();
    Ok(TailCurve::new(points, 0))
}

/// Rate `I(eps) = sup_lambda (lambda eps - Lambda(lambda))` for the centered
/// log-coordinate `coord`. The shipped laws are symmetric, so this is also the
/// lower-tail rate. Infinite when `eps` is at least the half-range.
pub fn chernoff_rate(law: &DiagonalLawSpec, coord: usize, eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    let range = law.coordinate_half_range(coord);
    if eps >= range {
        return f64::INFINITY;
    }
    let g = |l: f64| l * eps - law.coordinate_cgf(coord, l);
    let mut hi = 1.0 / (range - eps);
    while g(2.0 * hi) > g(hi) {
        hi *= 2.0;
    }
    golden_max(&g, 0.0, 2.0 * hi)
}

/// `2 exp(-n I(eps))`.
pub fn chernoff_bound(law: &DiagonalLawSpec, coord: usize, eps: f64, n: usize) -> f64 {
    (2.0 * (-(n as f64) * chernoff_rate(law, coord, eps)).exp()).min(1.0)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    f(0.5 * (a + b)).max(fc).max(fd)
}

/// `1 - mu_A^{*n}(E_n)` where `E_n` requires `t_i - t_j > n beta_ij` for every
/// cross-block gap of the product of `n` diagonal samples.
pub fn expansion_set_mass(law: &DiagonalLawSpec, ns: &[usize], trials: u64, seed: u64) -> Result<TailCurve> {
    check_grid(ns, trials)?;
    if !law.is_expanding() {
        return Err(Error::InvalidLaw(format!(
            "law is not expanding at pairs {:?}",
            law.violations()
        )));
    }
    let k0 = law.dims().k0();
    let counts = count_events(ns, trials, seed, Domain::Expansion, |rng, n| {
        let mut t = vec![0.0; k0];
        for _ in 0..n {
            for (acc, v) in t.iter_mut().zip(law.sample(rng).log_entries()) {
                *acc += v;
            }
        }
        let inside = law
            .gaps()
            .iter()
            .all(|g| t[g.i] - t[g.j] > n as f64 * g.beta);
        (!inside, 0)
    });
    let points = ns
        .iter()
        .zip(counts)
        .map(|(&n, (c, _))| TailPoint::new(n, c, trials))
        .collect();
    Ok(TailCurve::new(points, 0))
}

/// Consecutive zero unipotent draws tolerated before giving up.
pub const MAX_ZERO_REDRAWS: u32 = 1000;

/// Failure mass `P(|a u a^{-1}| / |u| <= C^n)`, measured on the parameter:
/// the ratio is `|C_{a^{-1}} x| / |x|` for the product `a` of `n` diagonal
/// samples and `x` drawn from the unipotent law.
pub fn conjugation_growth(
    law: &DiagonalLawSpec,
    unipotent: &UnipotentLawSpec,
    ns: &[usize],
    trials: u64,
    c_probe: f64,
    seed: u64,
) -> Result<TailCurve> {
    check_grid(ns, trials)?;
    if !(c_probe > 1.0) {
        return Err(Error::InvalidArgument(format!("C_probe {c_probe} must exceed 1")));
    }
    if law.dims() != unipotent.dims() {
        return Err(Error::InvalidArgument("laws have different dims".into()));
    }
    if unipotent.is_zero() {
        return Err(Error::InvalidLaw("unipotent law is the point mass at 0".into()));
    }
    let dims = law.dims();
    let (k1, k2, k0) = (dims.k1(), dims.k2(), dims.k0());
    let log_c = c_probe.ln();
    let gave_up = std::sync::atomic::AtomicBool::new(false);
    let counts = count_events(ns, trials, seed, Domain::Growth, |rng, n| {
        let mut t = vec![0.0; k0];
        for _ in 0..n {
            for (acc, v) in t.iter_mut().zip(law.sample(rng).log_entries()) {
                *acc += v;
            }
        }
        let mut redraws = 0u64;
        let x = loop {
            let x = unipotent.sample(rng);
            if x.norm() > 0.0 {
                break x;
            }
            redraws += 1;
            if redraws >= MAX_ZERO_REDRAWS as u64 {
                gave_up.store(true, std::sync::atomic::Ordering::Relaxed);
                return (true, redraws);
            }
        };
        // log of |C_{a^{-1}} x|^2 / |x|^2, computed relative to the largest exponent.
        let xs = x.as_slice();
        let mut logs = Vec::with_capacity(k1 * k2);
        for i in 0..k1 {
            for j in 0..k2 {
                let v = xs[i * k2 + j];
                if v != 0.0 {
                    logs.push(2.0 * (t[i] - t[k1 + j]) + 2.0 * v.abs().ln());
                }
            }
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let num = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let log_ratio = 0.5 * (num - 2.0 * x.norm().ln());
        (!(log_ratio > n as f64 * log_c), redraws)
    });
    if gave_up.into_inner() {
        return Err(Error::InvalidLaw(format!(
            "unipotent law drew 0 {MAX_ZERO_REDRAWS} times in a row"
        )));
    }
    let resampled = counts.iter().map(|c| c.1).sum();
    let points = ns
        .iter()
        .zip(counts)
        .map(|(&n, (c, _))| TailPoint::new(n, c, trials))
        .collect();
    Ok(TailCurve::new(points, resampled))
}
