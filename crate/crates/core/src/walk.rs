//! The random walk `z_n = a_n u_n ... a_1 u_1 z_0` on lattices.
//!
//! Step `s` of trial `t` draws from `stream(seed, domain, t, s)`: first the
//! unipotent parameter, then the diagonal sample.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{embed_u, Dims, DiagonalSample, UnipotentParam};
use crate::lattice::{gram_condition, lll, LatticePoint, Observable, MAX_GRAM_CONDITION};
use crate::measures::{DiagonalLawSpec, UnipotentLawSpec};
use crate::rng::{stream, Domain};

/// Recorded steps whose basis determinant drifts further than this from
/// `+-1` flag the trial.
pub const DRIFT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub dims: Dims,
    pub diagonal: DiagonalLawSpec,
    pub unipotent: UnipotentLawSpec,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub start: LatticePoint,
    pub observables: Vec<Observable>,
    /// Sorted, distinct steps in `1..=steps`.
    pub record: Vec<usize>,
}

impl WalkConfig {
    /// Checks the invariants; `record` is sorted and deduplicated in place.
    pub fn validate(mut self) -> Result<Self> {
        let mut errs = Vec::new();
        if self.steps == 0 {
            errs.push("steps must be at least 1".to_string());
        }
        if self.trials == 0 {
            errs.push("trials must be at least 1".to_string());
        }
        for (what, d) in [
            ("diagonal law", self.diagonal.dims()),
            ("unipotent law", self.unipotent.dims()),
            ("start point", self.start.dims()),
        ] {
            if d != self.dims {
                errs.push(format!("{what} has dims ({}, {})", d.k1(), d.k2()));
            }
        }
        for o in &self.observables {
            if let Err(e) = o.validate() {
                errs.push(e.to_string());
            }
        }
        self.record.sort_unstable();
        self.record.dedup();
        if let Some(s) = self.record.iter().find(|s| **s == 0 || **s > self.steps) {
            errs.push(format!("record step {s} outside 1..={}", self.steps));
        }
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Record every step.
    pub fn record_all(&mut self) {
        self.record = (1..=self.steps).collect();
    }
}

/// One sampled walk step `g = a u(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepElement {
    pub x: UnipotentParam,
    pub a: DiagonalSample,
}

impl StepElement {
    /// Draws `x` then `a` from `rng`.
    pub fn draw<R: Rng + ?Sized>(
        diagonal: &DiagonalLawSpec,
        unipotent: &UnipotentLawSpec,
        rng: &mut R,
    ) -> Self {
        let x = unipotent.sample(rng);
        let a = diagonal.sample(rng);
        StepElement { x, a }
    }

    /// The matrix `a u(x)`: row `i` of `u(x)` scaled by `e^{t_i}`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = embed_u(&self.x).entries().clone();
        for (i, t) in self.a.log_entries().iter().enumerate() {
            let s = t.exp();
            m.row_mut(i).scale_mut(s);
        }
        m
    }
}

/// The step element of `(trial, step)` under `cfg`, in the given stream domain.
pub fn step_element(cfg: &WalkConfig, domain: Domain, trial: u64, step: u64) -> StepElement {
    let mut rng = stream(cfg.seed, domain, trial, step);
    StepElement::draw(&cfg.diagonal, &cfg.unipotent, &mut rng)
}

/// Outcome of multiplying a lattice by one step.
enum Advance {
    Reduced(LatticePoint),
    /// Reduction failed but the basis is still usable.
    Excursion(LatticePoint),
    Abort,
}

fn advance(z: &LatticePoint, g: &StepElement) -> Advance {
    let basis = g.matrix() * z.basis();
    match lll(&basis) {
        Ok(b) => Advance::Reduced(reduced_point(z.dims(), b)),
        Err(_) if gram_condition(&basis) <= MAX_GRAM_CONDITION => {
            Advance::Excursion(LatticePoint::unchecked(z.dims(), basis))
        }
        Err(_) => Advance::Abort,
    }
}

fn reduced_point(dims: Dims, basis: DMatrix<f64>) -> LatticePoint {
    let mut p = LatticePoint::unchecked(dims, basis);
    p.mark_reduced();
    p
}

/// `g . z` followed by reduction, with `g = a u(x)`.
pub fn apply_step(z: &LatticePoint, g: &StepElement) -> Result<LatticePoint> {
    let basis = g.matrix() * z.basis();
    Ok(reduced_point(z.dims(), lll(&basis)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: u64,
    /// `values[r][o]`: observable `o` at recorded step `record[r]`; `None`
    /// after an abort or when the evaluation failed.
    pub values: Vec<Vec<Option<f64>>>,
    /// Steps at which reduction failed.
    pub excursions: Vec<usize>,
    pub aborted_at: Option<usize>,
    /// Largest `| |det| - 1 |` seen at recorded steps.
    pub max_det_drift: f64,
    pub drift_flag: bool,
    pub final_shortest: Option<f64>,
}

/// Runs one trial; deterministic in `(cfg, trial)`.
pub fn run_trial(cfg: &WalkConfig, trial: u64) -> TrialTrace {
    let mut z = cfg.start.clone();
    let mut values = Vec::with_capacity(cfg.record.len());
    let mut excursions = Vec::new();
    let mut aborted_at = None;
    let mut max_det_drift = 0.0f64;
    let mut next = 0;
    for s in 1..=cfg.steps {
        let g = step_element(cfg, Domain::Walk, trial, s as u64);
        match advance(&z, &g) {
            Advance::Reduced(p) => z = p,
            Advance::Excursion(p) => {
                excursions.push(s);
                z = p;
            }
            Advance::Abort => {
                excursions.push(s);
                aborted_at = Some(s);
                break;
            }
        }
        if next < cfg.record.len() && cfg.record[next] == s {
            max_det_drift = max_det_drift.max((z.det().abs() - 1.0).abs());
            values.push(
                cfg.observables
                    .iter()
                    .map(|o| o.evaluate(&z).ok())
                    .collect(),
            );
            next += 1;
        }
    }
    values.resize(cfg.record.len(), vec![None; cfg.observables.len()]);
    let final_shortest = if aborted_at.is_none() {
        crate::lattice::shortest_vector_len(&z).ok()
    } else {
        None
    };
    TrialTrace {
        trial,
        values,
        excursions,
        aborted_at,
        max_det_drift,
        drift_flag: max_det_drift > DRIFT_TOL,
        final_shortest,
    }
}

/// Count, sum and sum of squares; merging is associative and commutative
/// up to floating-point order, so callers merge in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub count: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl SufficientStats {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    pub fn merge(&mut self, other: &SufficientStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance; zero for a single value.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Ensemble mean of one observable at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatePoint {
    pub n: usize,
    pub observable: String,
    #[serde(with = "crate::float_serde")]
    pub mean: f64,
    #[serde(with = "crate::float_serde")]
    pub stderr: f64,
    /// Trials contributing a value.
    pub trials: u64,
    /// Trials without a value at this step.
    pub aborted: u64,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub traces: Vec<TrialTrace>,
    pub estimates: Vec<EstimatePoint>,
}

/// Runs trials `0..cfg.trials` in parallel and aggregates them.
pub fn run_ensemble(cfg: &WalkConfig) -> Result<EnsembleResult> {
    let traces: Vec<TrialTrace> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect();
    if traces.iter().all(|t| t.aborted_at.is_some()) {
        return Err(Error::AllTrialsAborted(traces.len()));
    }
    let estimates = aggregate(cfg, &traces);
    Ok(EnsembleResult { traces, estimates })
}

/// Per-(step, observable) means, merged in increasing trial order. Rows are
/// sorted by step, then observable name.
pub fn aggregate(cfg: &WalkConfig, traces: &[TrialTrace]) -> Vec<EstimatePoint> {
    let mut order: Vec<&TrialTrace> = traces.iter().collect();
    order.sort_by_key(|t| t.trial);
    let mut out = Vec::with_capacity(cfg.record.len() * cfg.observables.len());
    for (r, &n) in cfg.record.iter().enumerate() {
        for (o, obs) in cfg.observables.iter().enumerate() {
            let mut st = SufficientStats::default();
            for t in &order {
                if let Some(v) = t.values.get(r).and_then(|row| row[o]) {
                    st.push(v);
                }
            }
            out.push(EstimatePoint {
                n,
                observable: obs.name(),
                mean: st.mean(),
                stderr: st.stderr(),
                trials: st.count,
                aborted: order.len() as u64 - st.count,
            });
        }
    }
    out.sort_by(|a, b| a.n.cmp(&b.n).then_with(|| a.observable.cmp(&b.observable)));
    out
}

/// Running time average at one grid point of a single trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffPoint {
    pub n: usize,
    pub observable: String,
    #[serde(with = "crate::float_serde")]
    pub average: f64,
    /// Batch-means standard error; `NaN` when fewer than 20 values exist.
    #[serde(with = "crate::float_serde")]
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct BirkhoffResult {
    pub points: Vec<BirkhoffPoint>,
    pub excursions: Vec<usize>,
    pub aborted_at: Option<usize>,
}

/// Number of batches for the batch-means standard error.
pub const BIRKHOFF_BATCHES: usize = 100;

/// `n = round(10^{j/10})` up to `len`, plus `len` itself.
pub fn log_grid(len: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..)
        .map(|j| 10f64.powf(j as f64 / 10.0).round() as usize)
        .take_while(|n| *n <= len)
        .collect();
    g.push(len);
    g.dedup();
    g
}

/// Batch-means standard error of the mean of `xs`, using up to
/// [`BIRKHOFF_BATCHES`] contiguous batches of equal size.
pub fn batch_means_stderr(xs: &[f64]) -> f64 {
    let b = BIRKHOFF_BATCHES.min(xs.len() / 10);
    if b < 2 {
        return f64::NAN;
    }
    let m = xs.len() / b;
    let mut st = SufficientStats::default();
    for chunk in xs[..b * m].chunks_exact(m) {
        st.push(chunk.iter().sum::<f64>() / m as f64);
    }
    st.stderr()
}

/// One trajectory of length `len` (trial 0 of the Birkhoff stream domain),
/// evaluating every observable after each step.
pub fn run_birkhoff(cfg: &WalkConfig, len: usize) -> Result<BirkhoffResult> {
    if len == 0 {
        return Err(Error::InvalidArgument("trajectory length must be at least 1".into()));
    }
    let nobs = cfg.observables.len();
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(len); nobs];
    let mut z = cfg.start.clone();
    let mut excursions = Vec::new();
    let mut aborted_at = None;
    for s in 1..=len {
        let g = step_element(cfg, Domain::Birkhoff, 0, s as u64);
        match advance(&z, &g) {
            Advance::Reduced(p) => z = p,
            Advance::Excursion(p) => {
                excursions.push(s);
                z = p;
            }
            Advance::Abort => {
                excursions.push(s);
                aborted_at = Some(s);
                break;
            }
        }
        for (o, obs) in cfg.observables.iter().enumerate() {
            series[o].push(obs.evaluate(&z)?);
        }
    }
    let done = series.first().map_or(len, Vec::len);
    let mut points = Vec::new();
    for n in log_grid(done) {
        if n == 0 {
            continue;
        }
        for (o, obs) in cfg.observables.iter().enumerate() {
            let xs = &series[o][..n];
            points.push(BirkhoffPoint {
                n,
                observable: obs.name(),
                average: xs.iter().sum::<f64>() / n as f64,
                stderr: batch_means_stderr(xs),
            });
        }
    }
    points.sort_by(|a, b| a.n.cmp(&b.n).then_with(|| a.observable.cmp(&b.observable)));
    Ok(BirkhoffResult {
        points,
        excursions,
        aborted_at,
    })
}
