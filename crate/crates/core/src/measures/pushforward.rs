//! Determinant `F_psi`, non-planarity sampling, and comparisons of curve
//! pushforwards against their change-of-variables densities.

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::group::{theta, DiagonalMap, DiagonalSample};
use crate::rng::{chunked, Domain};

fn check_maps(maps: &[DiagonalMap], curve: &CurveSpec) -> Result<usize> {
    let k = curve.dim();
    if maps.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: maps.len(),
        });
    }
    if let Some(m) = maps.iter().find(|m| m.dim() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: m.dim(),
        });
    }
    Ok(k)
}

fn column_matrix(maps: &[DiagonalMap], x: &[f64], curve: &CurveSpec) -> DMatrix<f64> {
    let k = maps.len();
    let mut m = DMatrix::zeros(k, k);
    for (c, (a, &xc)) in maps.iter().zip(x).enumerate() {
        for (r, v) in a.apply(&curve.deriv(xc)).into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

/// `det[a_1 phi'(x_1), ..., a_k phi'(x_k)]`.
pub fn f_psi(maps: &[DiagonalMap], x: &[f64], curve: &CurveSpec) -> Result<f64> {
    let k = check_maps(maps, curve)?;
    if x.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("point {v} is outside [0, 1]")));
    }
    Ok(column_matrix(maps, x, curve).determinant())
}

/// `F_psi` and its gradient in `x`; the partial in `x_j` replaces column `j`
/// by `a_j phi''(x_j)`.
fn f_psi_with_gradient(maps: &[DiagonalMap], x: &[f64], curve: &CurveSpec) -> (f64, Vec<f64>) {
    let m = column_matrix(maps, x, curve);
    let f = m.determinant();
    let grad = (0..maps.len())
        .map(|j| {
            let mut mj = m.clone();
            for (r, v) in maps[j].apply(&curve.second_deriv(x[j])).into_iter().enumerate() {
                mj[(r, j)] = v;
            }
            mj.determinant()
        })
        .collect();
    (f, grad)
}

/// First-order distance `|F| / |grad F|` from `x` to the zero set of `F_psi`.
fn fold_distance(maps: &[DiagonalMap], x: &[f64], curve: &CurveSpec) -> f64 {
    let (f, g) = f_psi_with_gradient(maps, x, curve);
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if f == 0.0 {
        0.0
    } else if gn == 0.0 {
        f64::INFINITY
    } else {
        f.abs() / gn
    }
}

/// The block maps `theta(a_1, ..., a_k) = (theta_{k-1}(a_1..a_{k-1}), ..., theta_1(a_1), e)`.
pub fn theta_block(block: &[DiagonalSample]) -> Result<Vec<DiagonalMap>> {
    let first = block.first().ok_or(Error::Empty("block of diagonal samples"))?;
    let k = first.dims().k();
    if block.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: block.len(),
        });
    }
    let mut maps: Vec<DiagonalMap> = (1..k)
        .rev()
        .map(|i| theta(&block[..i]))
        .collect::<Result<_>>()?;
    maps.push(DiagonalMap::identity(k));
    Ok(maps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonplanarityReport {
    pub samples: u64,
    pub tol: f64,
    pub zero_count: u64,
    pub zero_fraction: f64,
    /// Smallest observed `|F_psi|`.
    pub min_abs: f64,
    /// Empirical 1% quantile of `|F_psi|`.
    pub q01_abs: f64,
    pub median_abs: f64,
}

/// Samples `x` uniformly in `[0, 1]^k` and counts `|F_psi(identity, x)| <= tol`.
pub fn nonplanarity_check(curve: &CurveSpec, samples: u64, tol: f64, seed: u64) -> Result<NonplanarityReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("nonplanarity check needs at least one sample".into()));
    }
    let k = curve.dim();
    let maps = vec![DiagonalMap::identity(k); k];
    let parts = chunked(samples, seed, Domain::Nonplanar, |rng, len| {
        let mut x = vec![0.0; k];
        (0..len)
            .map(|_| {
                for v in x.iter_mut() {
                    *v = rng.random::<f64>();
                }
                column_matrix(&maps, &x, curve).determinant().abs()
            })
            .collect::<Vec<f64>>()
    });
    let mut dets: Vec<f64> = parts.into_iter().flatten().collect();
    let zero_count = dets.iter().filter(|d| **d <= tol).count() as u64;
    let n = dets.len();
    let q = |dets: &mut Vec<f64>, p: f64| {
        let idx = ((p * (n - 1) as f64).round() as usize).min(n - 1);
        *dets.select_nth_unstable_by(idx, f64::total_cmp).1
    };
    let min_abs = dets.iter().copied().fold(f64::INFINITY, f64::min);
    let q01_abs = q(&mut dets, 0.01);
    let median_abs = q(&mut dets, 0.5);
    Ok(NonplanarityReport {
        samples,
        tol,
        zero_count,
        zero_fraction: zero_count as f64 / samples as f64,
        min_abs,
        q01_abs,
        median_abs,
    })
}

/// A regular product grid of half-open cells `[lo, hi)` in `R^k`, indexed in
/// row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cells: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != cells.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("grid bounds and cell counts must agree".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b && a.is_finite() && b.is_finite())) {
            return Err(Error::InvalidArgument("grid needs finite lo < hi on every axis".into()));
        }
        if cells.contains(&0) {
            return Err(Error::InvalidArgument("grid needs at least one cell per axis".into()));
        }
        Ok(Grid { lo, hi, cells })
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    pub fn cell_index(&self, y: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (axis, &v) in y.iter().enumerate() {
            if !(v >= self.lo[axis] && v < self.hi[axis]) {
                return None;
            }
            let c = (((v - self.lo[axis]) / self.step(axis)) as usize).min(self.cells[axis] - 1);
            idx = idx * self.cells[axis] + c;
        }
        Some(idx)
    }

    /// `[lo, hi)` of each axis of cell `idx`.
    pub fn cell_bounds(&self, idx: usize) -> Vec<(f64, f64)> {
        let mut rem = idx;
        let mut out = vec![(0.0, 0.0); self.dim()];
        for axis in (0..self.dim()).rev() {
            let c = rem % self.cells[axis];
            rem /= self.cells[axis];
            let h = self.step(axis);
            out[axis] = (self.lo[axis] + c as f64 * h, self.lo[axis] + (c + 1) as f64 * h);
        }
        out
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.step(a)).product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagnostic {
    pub grid: Grid,
    pub samples: u64,
    /// Empirical probability of each cell.
    pub histogram: Vec<f64>,
    /// Empirical probability outside the grid.
    pub histogram_escaped: f64,
    /// Cell masses from the change-of-variables density.
    pub analytic: Vec<f64>,
    /// Analytic mass outside the grid.
    pub analytic_escaped: f64,
    /// `sum over preimages of 1/|F_psi|` at each cell center.
    pub density_at_centers: Vec<f64>,
    pub flagged: Vec<bool>,
    pub flagged_count: usize,
    /// Total variation over unflagged cells plus the escaped-mass difference.
    pub tv: f64,
}

impl DensityDiagnostic {
    /// Analytic mass on unflagged cells plus empirical mass on flagged cells
    /// and outside the grid; should be close to 1.
    pub fn normalization(&self) -> f64 {
        let mut total = self.histogram_escaped;
        for ((a, h), f) in self.analytic.iter().zip(&self.histogram).zip(&self.flagged) {
            total += if *f { *h } else { *a };
        }
        total
    }
}

/// Histogram of `Psi_a(x) = sum a_i phi(x_i)` over uniform `x` against the
/// analytic pushforward. Supports `k <= 2`.
pub fn pushforward_density_check(
    maps: &[DiagonalMap],
    curve: &CurveSpec,
    grid: &Grid,
    samples: u64,
    seed: u64,
) -> Result<DensityDiagnostic> {
    let k = check_maps(maps, curve)?;
    if k > 2 {
        return Err(Error::InvalidArgument(format!(
            "density reconstruction supports k <= 2, got {k}"
        )));
    }
    if grid.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: grid.dim(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("density check needs at least one sample".into()));
    }

    let ncells = grid.len();
    let parts = chunked(samples, seed, Domain::Density, |rng, len| {
        let mut counts = vec![0u64; ncells + 1];
        let mut x = vec![0.0; k];
        for _ in 0..len {
            for v in x.iter_mut() {
                *v = rng.random::<f64>();
            }
            let y = psi(maps, curve, &x);
            counts[grid.cell_index(&y).unwrap_or(ncells)] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; ncells + 1];
    for part in parts {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    let histogram: Vec<f64> = counts[..ncells].iter().map(|c| *c as f64 / samples as f64).collect();
    let histogram_escaped = counts[ncells] as f64 / samples as f64;

    let (analytic, density_at_centers, flagged) = if k == 1 {
        analytic_1d(&maps[0], curve, grid)
    } else {
        analytic_2d(maps, curve, grid)
    };
    let analytic_escaped = if k == 1 {
        (1.0 - analytic.iter().sum::<f64>()).max(0.0)
    } else {
        escaped_by_midpoints(maps, curve, grid)
    };
    let mut tv = (histogram_escaped - analytic_escaped).abs();
    for c in 0..ncells {
        if !flagged[c] {
            tv += (histogram[c] - analytic[c]).abs();
        }
    }
    let flagged_count = flagged.iter().filter(|f| **f).count();
    Ok(DensityDiagnostic {
        grid: grid.clone(),
        samples,
        histogram,
        histogram_escaped,
        analytic,
        analytic_escaped,
        density_at_centers,
        flagged,
        flagged_count,
        tv: tv / 2.0,
    })
}

fn psi(maps: &[DiagonalMap], curve: &CurveSpec, x: &[f64]) -> Vec<f64> {
    let k = maps.len();
    let mut y = vec![0.0; k];
    for (a, &xi) in maps.iter().zip(x) {
        for (yr, v) in y.iter_mut().zip(a.apply(&curve.eval(xi))) {
            *yr += v;
        }
    }
    y
}

const SCAN_POINTS: usize = 4096;

/// Splits `[0, 1]` at the zeros of `g'` so that `g` is monotone on each piece.
fn monotone_pieces(dg: &dyn Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![0.0];
    let mut prev_t = 0.0;
    let mut prev = dg(0.0);
    for s in 1..=SCAN_POINTS {
        let t = s as f64 / SCAN_POINTS as f64;
        let v = dg(t);
        if prev != 0.0 && v != 0.0 && prev.signum() != v.signum() {
            cuts.push(bisect(dg, prev_t, t, 0.0));
        } else if v == 0.0 && prev != 0.0 && s < SCAN_POINTS {
            cuts.push(t);
        }
        prev_t = t;
        prev = v;
    }
    cuts.push(1.0);
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Root of `f = target` on `[a, b]` for monotone `f` with a sign change.
fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, target: f64) -> f64 {
    let fa = f(a) - target;
    if fa == 0.0 {
        return a;
    }
    if f(b) == target {
        return b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m) - target;
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn analytic_1d(a: &DiagonalMap, curve: &CurveSpec, grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let c = a.coeffs()[0];
    let g = |t: f64| c * curve.eval(t)[0];
    let dg = |t: f64| c * curve.deriv(t)[0];
    let pieces = monotone_pieces(&dg);
    let n = grid.len();
    let mut mass = vec![0.0; n];
    let mut dens = vec![0.0; n];
    for (p, q) in &pieces {
        let (gp, gq) = (g(*p), g(*q));
        let (vlo, vhi) = (gp.min(gq), gp.max(gq));
        let const_piece = vlo == vhi || (0..=8).all(|s| dg(p + (q - p) * s as f64 / 8.0) == 0.0);
        for cell in 0..n {
            let (y0, y1) = grid.cell_bounds(cell)[0];
            if const_piece {
                if y0 <= vlo && vlo < y1 {
                    mass[cell] += q - p;
                }
                continue;
            }
            let lo = y0.max(vlo);
            let hi = y1.min(vhi);
            if lo < hi {
                let xa = bisect(&g, *p, *q, lo);
                let xb = bisect(&g, *p, *q, hi);
                mass[cell] += (xb - xa).abs();
            }
            let yc = 0.5 * (y0 + y1);
            if vlo < yc && yc < vhi {
                let x = bisect(&g, *p, *q, yc);
                dens[cell] += 1.0 / dg(x).abs();
            }
        }
    }
    (mass, dens, vec![false; n])
}

const ESCAPE_MIDPOINTS: usize = 1024;

/// Lebesgue mass of `{x in [0,1]^2 : Psi(x) outside the grid}` by the midpoint rule.
fn escaped_by_midpoints(maps: &[DiagonalMap], curve: &CurveSpec, grid: &Grid) -> f64 {
    let h = 1.0 / ESCAPE_MIDPOINTS as f64;
    let mut out = 0usize;
    for i in 0..ESCAPE_MIDPOINTS {
        for j in 0..ESCAPE_MIDPOINTS {
            let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            if grid.cell_index(&psi(maps, curve, &x)).is_none() {
                out += 1;
            }
        }
    }
    out as f64 * h * h
}

const NEWTON_STARTS: usize = 6;
const SUBCELLS: usize = 4;
const FOLD_MARGIN: f64 = 0.02;
const MAX_DENSITY_RATIO: f64 = 4.0;

/// All preimages in `[0, 1]^2` of `y` under `Psi`, found by multistart Newton.
fn preimages_2d(maps: &[DiagonalMap], curve: &CurveSpec, y: Vector2<f64>) -> Vec<Vector2<f64>> {
    let mut found: Vec<Vector2<f64>> = Vec::new();
    let scale = 1.0 + y.norm();
    for s0 in 0..NEWTON_STARTS {
        for s1 in 0..NEWTON_STARTS {
            let mut x = Vector2::new(
                (s0 as f64 + 0.5) / NEWTON_STARTS as f64,
                (s1 as f64 + 0.5) / NEWTON_STARTS as f64,
            );
            let mut converged = false;
            for _ in 0..60 {
                let r = Vector2::from_vec(psi(maps, curve, x.as_slice())) - y;
                if r.norm() < 1e-13 * scale {
                    converged = true;
                    break;
                }
                let m = column_matrix(maps, x.as_slice(), curve);
                let j = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                let Some(inv) = j.try_inverse() else { break };
                x -= inv * r;
                if x.iter().any(|v| !(-0.5..=1.5).contains(v)) {
                    break;
                }
            }
            if converged
                && x.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v))
                && found.iter().all(|f| (f - x).norm() > 1e-7)
            {
                found.push(x);
            }
        }
    }
    found
}

fn analytic_2d(maps: &[DiagonalMap], curve: &CurveSpec, grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let n = grid.len();
    let sub_area = grid.cell_volume() / (SUBCELLS * SUBCELLS) as f64;
    let density = |y: Vector2<f64>| -> (f64, bool) {
        let mut d = 0.0;
        let mut near_fold = false;
        for x in preimages_2d(maps, curve, y) {
            let f = column_matrix(maps, x.as_slice(), curve).determinant().abs();
            if fold_distance(maps, x.as_slice(), curve) < FOLD_MARGIN || f == 0.0 {
                near_fold = true;
            }
            if f > 0.0 {
                d += 1.0 / f;
            }
        }
        (d, near_fold)
    };
    let results: Vec<(f64, f64, bool)> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|cell| {
                let b = grid.cell_bounds(cell);
                let (hx, hy) = ((b[0].1 - b[0].0) / SUBCELLS as f64, (b[1].1 - b[1].0) / SUBCELLS as f64);
                let mut mass = 0.0;
                let mut flag = false;
                let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
                for i in 0..SUBCELLS {
                    for j in 0..SUBCELLS {
                        let y = Vector2::new(b[0].0 + (i as f64 + 0.5) * hx, b[1].0 + (j as f64 + 0.5) * hy);
                        let (d, near) = density(y);
                        flag |= near;
                        dmin = dmin.min(d);
                        dmax = dmax.max(d);
                        mass += d * sub_area;
                    }
                }
                if dmax > 0.0 && (dmin == 0.0 || dmax / dmin > MAX_DENSITY_RATIO) {
                    flag = true;
                }
                let center = Vector2::new(0.5 * (b[0].0 + b[0].1), 0.5 * (b[1].0 + b[1].1));
                (mass, density(center).0, flag)
            })
            .collect()
    };
    let mut mass = Vec::with_capacity(n);
    let mut dens = Vec::with_capacity(n);
    let mut flagged = Vec::with_capacity(n);
    for (m, d, f) in results {
        mass.push(m);
        dens.push(d);
        flagged.push(f);
    }
    (mass, dens, flagged)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSplitReport {
    pub blocks: usize,
    pub delta: f64,
    pub samples: u64,
    /// Fraction of draws whose block-`i` parameter lies within `delta` of the
    /// zero set of that block's `F_psi`.
    pub per_block_mass: Vec<f64>,
    /// Product of the per-block masses.
    pub product: f64,
    /// Fraction of draws that are near the zero set in every block at once.
    pub joint_mass: f64,
    /// Mean of the sampled convolution.
    pub sample_mean: Vec<f64>,
}

/// Samples the convolution over a word of `n` blocks of `k` diagonal samples
/// and measures how much of each block's parameter mass sits within `delta`
/// of the singular set `{F_psi = 0}`.
pub fn nu_bar_mass_split(
    word: &[Vec<DiagonalSample>],
    curve: &CurveSpec,
    delta: f64,
    samples: u64,
    seed: u64,
) -> Result<MassSplitReport> {
    let n = word.len();
    if n == 0 || n > 6 {
        return Err(Error::InvalidArgument(format!("word length {n} outside 1..=6")));
    }
    let k = curve.dim();
    if k > 2 {
        return Err(Error::InvalidArgument(format!("mass split supports k <= 2, got {k}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument("delta must be nonnegative".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("mass split needs at least one sample".into()));
    }
    let flat: Vec<DiagonalSample> = word.iter().flatten().cloned().collect();
    if flat.iter().any(|a| a.dims().k() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: flat.iter().map(|a| a.dims().k()).find(|d| *d != k).unwrap_or(k),
        });
    }
    let mut prefixes = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(n);
    for (i, block) in word.iter().enumerate() {
        prefixes.push(if i == 0 {
            DiagonalMap::identity(k)
        } else {
            theta(&flat[..k * i])?
        });
        blocks.push(theta_block(block)?);
    }

    let parts = chunked(samples, seed, Domain::MassSplit, |rng, len| {
        let mut near = vec![0u64; n];
        let mut joint = 0u64;
        let mut sum = vec![0.0; k];
        let mut x = vec![0.0; k];
        for _ in 0..len {
            let mut all = true;
            for i in 0..n {
                for v in x.iter_mut() {
                    *v = rng.random::<f64>();
                }
                for (s, v) in sum.iter_mut().zip(prefixes[i].apply(&psi(&blocks[i], curve, &x))) {
                    *s += v;
                }
                if fold_distance(&blocks[i], &x, curve) < delta {
                    near[i] += 1;
                } else {
                    all = false;
                }
            }
            if all {
                joint += 1;
            }
        }
        (near, joint, sum)
    });
    let mut near = vec![0u64; n];
    let mut joint = 0u64;
    let mut sum = vec![0.0; k];
    for (pn, pj, ps) in parts {
        for (a, b) in near.iter_mut().zip(pn) {
            *a += b;
        }
        joint += pj;
        for (a, b) in sum.iter_mut().zip(ps) {
            *a += b;
        }
    }
    let per_block_mass: Vec<f64> = near.iter().map(|c| *c as f64 / samples as f64).collect();
    Ok(MassSplitReport {
        blocks: n,
        delta,
        samples,
        product: per_block_mass.iter().product(),
        per_block_mass,
        joint_mass: joint as f64 / samples as f64,
        sample_mean: sum.into_iter().map(|s| s / samples as f64).collect(),
    })
}
