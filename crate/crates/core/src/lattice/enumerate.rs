//! Fincke-Pohst style enumeration of lattice vectors in a ball, driven by the
//! Gram-Schmidt data of a reduced basis.

use crate::error::{Error, Result};
use crate::lattice::reduce::{columns, dot, gram_schmidt, GramSchmidt};
use nalgebra::DMatrix;

/// Maximum number of enumeration nodes visited per call.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

const RADIUS_SLACK: f64 = 1e-9;

struct Enumerator<'a> {
    cols: Vec<Vec<f64>>,
    gs: GramSchmidt,
    bound_sq: f64,
    coeffs: Vec<i64>,
    nodes: u64,
    budget: u64,
    visit: &'a mut dyn FnMut(f64),
}

impl Enumerator<'_> {
    fn recurse(&mut self, level: usize, partial: f64) -> Result<()> {
        let d = self.cols.len();
        let mut center = 0.0;
        for j in level + 1..d {
            center -= self.gs.mu[j][level] * self.coeffs[j] as f64;
        }
        let rem = (self.bound_sq - partial) / self.gs.norms_sq[level];
        if rem < 0.0 {
            return Ok(());
        }
        let r = rem.sqrt();
        let lo = (center - r).ceil() as i64;
        let hi = (center + r).floor() as i64;
        for x in lo..=hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded {
                    budget: self.budget,
                });
            }
            self.coeffs[level] = x;
            let diff = x as f64 - center;
            let next = partial + diff * diff * self.gs.norms_sq[level];
            if level == 0 {
                if self.coeffs.iter().any(|&c| c != 0) {
                    let n = self.cols[0].len();
                    let mut v = vec![0.0; n];
                    for (c, col) in self.coeffs.iter().zip(&self.cols) {
                        if *c != 0 {
                            for (vi, bi) in v.iter_mut().zip(col) {
                                *vi += *c as f64 * bi;
                            }
                        }
                    }
                    (self.visit)(dot(&v, &v));
                }
            } else {
                self.recurse(level - 1, next)?;
            }
        }
        self.coeffs[level] = 0;
        Ok(())
    }
}

/// Calls `visit` with the squared length of every nonzero lattice vector whose
/// length is at most `radius` (plus a relative slack; callers compare exactly).
pub(crate) fn for_each_in_ball(
    reduced_basis: &DMatrix<f64>,
    radius: f64,
    budget: u64,
    visit: &mut dyn FnMut(f64),
) -> Result<()> {
    let cols = columns(reduced_basis);
    let d = cols.len();
    let gs = gram_schmidt(&cols);
    let mut e = Enumerator {
        cols,
        gs,
        bound_sq: radius * radius * (1.0 + RADIUS_SLACK),
        coeffs: vec![0; d],
        nodes: 0,
        budget,
        visit,
    };
    e.recurse(d - 1, 0.0)
}

/// Length of a shortest nonzero vector of the lattice spanned by `reduced_basis`.
pub(crate) fn shortest_length(reduced_basis: &DMatrix<f64>) -> Result<f64> {
    let start = (0..reduced_basis.ncols())
        .map(|j| reduced_basis.column(j).norm_squared())
        .fold(f64::INFINITY, f64::min);
    let mut best = start;
    for_each_in_ball(reduced_basis, start.sqrt(), ENUMERATION_BUDGET, &mut |n2| {
        if n2 < best {
            best = n2;
        }
    })?;
    Ok(best.sqrt())
}

/// Number of nonzero lattice vectors of length at most `radius`.
pub(crate) fn count_in_ball(reduced_basis: &DMatrix<f64>, radius: f64, budget: u64) -> Result<u64> {
    let r2 = radius * radius;
    let mut count = 0u64;
    for_each_in_ball(reduced_basis, radius, budget, &mut |n2| {
        if n2 <= r2 {
            count += 1;
        }
    })?;
    Ok(count)
}
