use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ad_unipotent, q_project, Dims, LieAlgebraElement, UnipotentParam};
use crate::measures::uniform_ball;
use crate::rng::{chunked, derive_seed, stream, Domain};
use crate::walk::{step_element, StepElement, WalkConfig};

/// `Ad(a u(x)) v`: the closed-form unipotent action followed by the diagonal
/// scaling of entry `(p, q)` by `e^{t_p - t_q}`.
pub fn ad_step(g: &StepElement, v: &LieAlgebraElement) -> LieAlgebraElement {
    let w = ad_unipotent(&g.x, v);
    let t = g.a.log_entries();
    let mut m = w.entries().clone();
    for p in 0..m.nrows() {
        for q in 0..m.ncols() {
            if p != q {
                m[(p, q)] *= (t[p] - t[q]).exp();
            }
        }
    }
    LieAlgebraElement::from_conjugate(v.dims(), m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub steps: usize,
    pub trials: usize,
    /// `exponents[trial][v]`: `(1/n) (log |Ad(g_n ... g_1) v| - log |v|)`,
    /// or `-inf` when the renormalized vector underflowed.
    pub exponents: Vec<Vec<f64>>,
    /// Mean exponent of each `v` over trials.
    pub mean: Vec<f64>,
    pub nonpositive: usize,
    pub nonpositive_fraction: f64,
    pub underflows: usize,
}

/// Accumulates `log |Ad(g_n ... g_1) v|` with per-step renormalization.
/// The steps of trial `t` come from the Lyapunov stream domain and are shared by every `v`.
pub fn lyapunov_check(
    cfg: &WalkConfig,
    vs: &[LieAlgebraElement],
    steps: usize,
    trials: usize,
) -> Result<LyapunovReport> {
    if steps == 0 || trials == 0 {
        return Err(Error::InvalidArgument("steps and trials must be positive".into()));
    }
    for v in vs {
        if v.dims() != cfg.dims {
            return Err(Error::InvalidArgument("v has the wrong dims".into()));
        }
        if v.is_zero() {
            return Err(Error::InvalidArgument("v must be nonzero".into()));
        }
    }
    let exponents: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let word: Vec<StepElement> = (1..=steps as u64)
                .map(|s| step_element(cfg, Domain::Lyapunov, trial, s))
                .collect();
            vs.iter().map(|v| exponent(&word, v)).collect()
        })
        .collect();
    let nv = vs.len();
    let mut mean = vec![0.0; nv];
    for row in &exponents {
        for (m, e) in mean.iter_mut().zip(row) {
            *m += e / trials as f64;
        }
    }
    let flat = exponents.iter().flatten();
    let nonpositive = flat.clone().filter(|e| !(**e > 0.0)).count();
    let underflows = flat.filter(|e| **e == f64::NEG_INFINITY).count();
    Ok(LyapunovReport {
        steps,
        trials,
        nonpositive,
        nonpositive_fraction: nonpositive as f64 / (trials * nv).max(1) as f64,
        underflows,
        exponents,
        mean,
    })
}

fn exponent(word: &[StepElement], v: &LieAlgebraElement) -> f64 {
    let mut w = v.scale(1.0 / v.norm());
    let mut log_sum = 0.0;
    for g in word {
        w = ad_step(g, &w);
        let r = w.norm();
        if !(r > 0.0 && r.is_finite()) {
            return f64::NEG_INFINITY;
        }
        log_sum += r.ln();
        w = w.scale(1.0 / r);
    }
    log_sum / word.len() as f64
}

/// `n` random traceless matrices with i.i.d. standard normal off-diagonal
/// entries and a traceless normal diagonal.
pub fn random_traceless(dims: Dims, n: usize, seed: u64) -> Vec<LieAlgebraElement> {
    use rand_distr::{Distribution, StandardNormal};
    let k0 = dims.k0();
    (0..n as u64)
        .map(|i| {
            let mut rng = stream(seed, Domain::Sampler, i, 0);
            let mut m = nalgebra::DMatrix::from_fn(k0, k0, |_, _| StandardNormal.sample(&mut rng));
            let tr = m.trace() / k0 as f64;
            for d in 0..k0 {
                m[(d, d)] -= tr;
            }
            LieAlgebraElement::from_conjugate(dims, m)
        })
        .collect()
}

/// Threshold for `|Q(Ad(u(x)) v)|` counted as vanishing.
pub const Q_ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QReport {
    pub samples: u64,
    /// Per `v`: fraction of draws with `|Q(Ad(u(x)) v)| <= Q_ZERO_TOL`.
    pub zero_fraction: Vec<f64>,
    /// Per `v`: smallest observed norm.
    pub min_norm: Vec<f64>,
    pub total_zero: u64,
}

/// Draws `x` uniformly from the ball of `radius` in `R^k` and tests whether
/// the projection of `Ad(u(x)) v` onto the Lie algebra of `U` vanishes.
pub fn q_nonvanishing_check(vs: &[LieAlgebraElement], samples: u64, radius: f64, seed: u64) -> Result<QReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if let Some(i) = vs.iter().position(LieAlgebraElement::is_zero) {
        return Err(Error::InvalidArgument(format!("v[{i}] is zero")));
    }
    let mut zero_fraction = Vec::with_capacity(vs.len());
    let mut min_norm = Vec::with_capacity(vs.len());
    let mut total_zero = 0;
    for (i, v) in vs.iter().enumerate() {
        let dims = v.dims();
        let parts = chunked(samples, derive_seed(seed, i as u64), Domain::QCheck, |rng, len| {
            let mut zeros = 0u64;
            let mut min = f64::INFINITY;
            for _ in 0..len {
                let x = UnipotentParam::new(dims, uniform_ball(dims.k(), radius, rng)).expect("length k");
                let q = q_project(&ad_unipotent(&x, v)).norm();
                if q <= Q_ZERO_TOL {
                    zeros += 1;
                }
                min = min.min(q);
            }
            (zeros, min)
        });
        let zeros: u64 = parts.iter().map(|p| p.0).sum();
        total_zero += zeros;
        zero_fraction.push(zeros as f64 / samples as f64);
        min_norm.push(parts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
    }
    Ok(QReport {
        samples,
        zero_fraction,
        min_norm,
        total_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{ad_action, GroupElement};
    use crate::lattice::{LatticePoint, Observable};
    use crate::measures::{DiagonalLawSpec, LawKind, UnipotentLawSpec};
    use nalgebra::DMatrix;

    fn cfg(dims: Dims, means: Vec<f64>, w: f64, zero_u: bool) -> WalkConfig {
        let k0 = dims.k0();
        WalkConfig {
            dims,
            diagonal: DiagonalLawSpec::new(dims, means, vec![w; k0], LawKind::UniformBox).unwrap(),
            unipotent: if zero_u {
                UnipotentLawSpec::point_mass(dims, vec![0.0; dims.k()]).unwrap()
            } else {
                UnipotentLawSpec::moment(dims)
            },
            steps: 1,
            trials: 1,
            seed: 5,
            start: LatticePoint::standard(dims),
            observables: vec![Observable::ShortestLog],
            record: vec![1],
        }
    }

    #[test]
    fn ad_step_matches_conjugation() {
        let dims = Dims::new(2, 1).unwrap();
        let c = cfg(dims, vec![0.4, 0.1, -0.5], 0.3, false);
        let g = step_element(&c, Domain::Lyapunov, 0, 1);
        let v = random_traceless(dims, 1, 3).pop().unwrap();
        let direct = ad_action(&GroupElement::new(dims, g.matrix()).unwrap(), &v).unwrap();
        let fast = ad_step(&g, &v);
        assert!((direct.entries() - fast.entries()).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn deterministic_exponent_is_the_gap() {
        let dims = Dims::new(1, 1).unwrap();
        let c = cfg(dims, vec![0.5, -0.5], 0.0, true);
        let v = LieAlgebraElement::elementary(dims, 0, 1).unwrap();
        let r = lyapunov_check(&c, &[v], 50, 3).unwrap();
        for row in &r.exponents {
            assert!((row[0] - 1.0).abs() < 1e-9);
        }
        let dims = Dims::new(2, 1).unwrap();
        let c = cfg(dims, vec![0.4, 0.1, -0.5], 0.0, true);
        let v = LieAlgebraElement::elementary(dims, 0, 2).unwrap();
        let r = lyapunov_check(&c, &[v], 50, 1).unwrap();
        assert!((r.exponents[0][0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn exponent_is_scale_invariant() {
        let dims = Dims::new(1, 1).unwrap();
        let c = cfg(dims, vec![0.5, -0.5], 1.0, false);
        let v = random_traceless(dims, 1, 9).pop().unwrap();
        let r1 = lyapunov_check(&c, &[v.clone()], 40, 5).unwrap();
        let r17 = lyapunov_check(&c, &[v.scale(17.0)], 40, 5).unwrap();
        for (a, b) in r1.exponents.iter().zip(&r17.exponents) {
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_zero_vectors() {
        let dims = Dims::new(1, 1).unwrap();
        let c = cfg(dims, vec![0.5, -0.5], 1.0, false);
        let zero = LieAlgebraElement::new(dims, DMatrix::zeros(2, 2)).unwrap();
        assert!(lyapunov_check(&c, &[zero.clone()], 5, 1).is_err());
        assert!(q_nonvanishing_check(&[zero], 10, 1.0, 1).is_err());
    }

    #[test]
    fn random_vectors_are_traceless() {
        for v in random_traceless(Dims::new(2, 2).unwrap(), 10, 1) {
            assert!(v.trace().abs() < 1e-12);
            assert!(!v.is_zero());
        }
    }

    #[test]
    fn q_examples() {
        let dims = Dims::new(1, 1).unwrap();
        let e12 = LieAlgebraElement::elementary(dims, 0, 1).unwrap();
        let r = q_nonvanishing_check(&[e12.clone()], 1000, 1.0, 1).unwrap();
        assert_eq!(r.total_zero, 0);
        assert!((r.min_norm[0] - 1.0).abs() < 1e-15);
        assert_eq!(q_project(&ad_unipotent(&UnipotentParam::zero(dims), &e12)).norm(), 1.0);
        let lower = LieAlgebraElement::new(dims, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])).unwrap();
        let r = q_nonvanishing_check(&[lower], 10_000, 1.0, 2).unwrap();
        assert_eq!(r.zero_fraction, vec![0.0]);
        assert!(r.min_norm[0] > 0.0);
    }
}
