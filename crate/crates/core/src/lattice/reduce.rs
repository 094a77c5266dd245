//! Floating-point LLL reduction on column bases.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Lovász exchange parameter.
pub const LOVASZ_DELTA: f64 = 0.75;
/// Gram matrices with a larger condition number are treated as singular.
pub const MAX_GRAM_CONDITION: f64 = 1e14;

const MAX_ITERATIONS: usize = 100_000;
const SIZE_SLACK: f64 = 1e-9;

/// Gram-Schmidt data of a column basis: `mu[i][j] = <b_i, b*_j> / |b*_j|^2`
/// for `j < i`, and the squared lengths `|b*_i|^2`.
#[derive(Clone, Debug)]
pub(crate) struct GramSchmidt {
    pub mu: Vec<Vec<f64>>,
    pub norms_sq: Vec<f64>,
}

pub(crate) fn gram_schmidt(cols: &[Vec<f64>]) -> GramSchmidt {
    let d = cols.len();
    let mut stars: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut mu = vec![vec![0.0; d]; d];
    let mut norms_sq = vec![0.0; d];
    for i in 0..d {
        let mut v = cols[i].clone();
        for j in 0..i {
            let m = dot(&cols[i], &stars[j]) / norms_sq[j];
            mu[i][j] = m;
            for (vi, sj) in v.iter_mut().zip(&stars[j]) {
                *vi -= m * sj;
            }
        }
        mu[i][i] = 1.0;
        norms_sq[i] = dot(&v, &v);
        stars.push(v);
    }
    GramSchmidt { mu, norms_sq }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().copied().collect())
        .collect()
}

pub(crate) fn from_columns(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Ratio of extreme eigenvalues of `B^T B`; infinite when the smallest is not positive.
pub fn gram_condition(basis: &DMatrix<f64>) -> f64 {
    let gram = basis.transpose() * basis;
    let eig = SymmetricEigen::new(gram);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if !(lo > 0.0) || !hi.is_finite() {
        return f64::INFINITY;
    }
    hi / lo
}

/// LLL-reduces the columns of `basis`. The result generates the same lattice.
pub fn lll(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let fail = |reason: String| Error::Reduction {
        reason,
        basis: basis.clone(),
    };
    if basis.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite basis entry".into()));
    }
    let cond = gram_condition(basis);
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(fail(format!("Gram condition number {cond:e} above {MAX_GRAM_CONDITION:e}")));
    }

    let mut cols = columns(basis);
    let d = cols.len();
    if d < 2 {
        return Ok(basis.clone());
    }
    let mut gs = gram_schmidt(&cols);
    let mut k = 1;
    let mut iterations = 0;
    while k < d {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(fail("iteration limit reached".into()));
        }
        if size_reduce(&mut cols, &mut gs, k) {
            gs = gram_schmidt(&cols);
        }
        let m = gs.mu[k][k - 1];
        if gs.norms_sq[k] >= (LOVASZ_DELTA - m * m) * gs.norms_sq[k - 1] {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            gs = gram_schmidt(&cols);
            k = (k - 1).max(1);
        }
    }
    Ok(from_columns(&cols))
}

/// Size-reduces column `k` against all earlier columns; returns whether it changed.
fn size_reduce(cols: &mut [Vec<f64>], gs: &mut GramSchmidt, k: usize) -> bool {
    let mut changed = false;
    for j in (0..k).rev() {
        let q = gs.mu[k][j].round();
        if q != 0.0 {
            changed = true;
            let (head, tail) = cols.split_at_mut(k);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= q * y;
            }
            for i in 0..j {
                gs.mu[k][i] -= q * gs.mu[j][i];
            }
            gs.mu[k][j] -= q;
        }
    }
    changed
}

/// Checks size reduction `|mu_ij| <= 1/2` and the Lovász condition.
pub fn is_lll_reduced(basis: &DMatrix<f64>, delta: f64) -> bool {
    let cols = columns(basis);
    let gs = gram_schmidt(&cols);
    let d = cols.len();
    for i in 1..d {
        for j in 0..i {
            if gs.mu[i][j].abs() > 0.5 + SIZE_SLACK {
                return false;
            }
        }
        let m = gs.mu[i][i - 1];
        let rhs = (delta - m * m) * gs.norms_sq[i - 1];
        if gs.norms_sq[i] < rhs * (1.0 - SIZE_SLACK) {
            return false;
        }
    }
    true
}
