//! Points of `X = SL(k0, R) / SL(k0, Z)` stored as unimodular lattice bases.

mod enumerate;
mod observable;
mod reduce;

pub use enumerate::ENUMERATION_BUDGET;
pub use observable::{ball_volume, bump_profile, Observable};
pub use reduce::{gram_condition, is_lll_reduced, lll, LOVASZ_DELTA, MAX_GRAM_CONDITION};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::group::{Dims, GroupElement, DET_TOL};

/// A unimodular lattice `g Z^{k0}` given by the columns of `basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePoint {
    dims: Dims,
    basis: DMatrix<f64>,
    reduced: bool,
}

impl LatticePoint {
    pub fn new(dims: Dims, basis: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(dims, basis, DET_TOL)
    }

    pub fn with_tolerance(dims: Dims, basis: DMatrix<f64>, det_tol: f64) -> Result<Self> {
        let n = dims.k0();
        if basis.nrows() != n || basis.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: basis.nrows() * basis.ncols(),
            });
        }
        let det = basis.determinant();
        if !((det.abs() - 1.0).abs() <= det_tol) {
            return Err(Error::Determinant {
                det,
                target: det.signum(),
                tol: det_tol,
            });
        }
        Ok(LatticePoint {
            dims,
            basis,
            reduced: false,
        })
    }

    /// The standard lattice `Z^{k0}`.
    pub fn standard(dims: Dims) -> Self {
        LatticePoint {
            dims,
            basis: DMatrix::identity(dims.k0(), dims.k0()),
            reduced: true,
        }
    }

    pub(crate) fn unchecked(dims: Dims, basis: DMatrix<f64>) -> Self {
        LatticePoint {
            dims,
            basis,
            reduced: false,
        }
    }

    /// For bases just produced by [`lll`].
    pub(crate) fn mark_reduced(&mut self) {
        self.reduced = true;
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn det(&self) -> f64 {
        self.basis.determinant()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.basis.transpose() * &self.basis
    }

    /// Row-major basis entries with 17 significant digits, separated by spaces.
    pub fn to_row_major_string(&self) -> String {
        let n = self.dims.k0();
        let mut parts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                parts.push(format!("{:.16e}", self.basis[(i, j)]));
            }
        }
        parts.join(" ")
    }

    pub fn from_row_major_string(dims: Dims, s: &str) -> Result<Self> {
        let vals: std::result::Result<Vec<f64>, _> = s.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|e| Error::InvalidArgument(format!("basis entry: {e}")))?;
        let n = dims.k0();
        if vals.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: vals.len(),
            });
        }
        LatticePoint::new(dims, DMatrix::from_row_slice(n, n, &vals))
    }
}

/// Canonical representative of the coset: an LLL-reduced basis of the same lattice.
pub fn reduce(p: &LatticePoint) -> Result<LatticePoint> {
    if p.reduced {
        return Ok(p.clone());
    }
    let basis = lll(&p.basis)?;
    Ok(LatticePoint {
        dims: p.dims,
        basis,
        reduced: true,
    })
}

fn reduced_basis(p: &LatticePoint) -> Result<std::borrow::Cow<'_, DMatrix<f64>>> {
    if p.reduced {
        Ok(std::borrow::Cow::Borrowed(&p.basis))
    } else {
        Ok(std::borrow::Cow::Owned(lll(&p.basis)?))
    }
}

/// Euclidean length of a shortest nonzero lattice vector.
pub fn shortest_vector_len(p: &LatticePoint) -> Result<f64> {
    enumerate::shortest_length(&*reduced_basis(p)?)
}

/// `#{v in L \ {0} : |v| <= radius}`.
pub fn siegel_count(p: &LatticePoint, radius: f64) -> Result<u64> {
    siegel_count_with_budget(p, radius, ENUMERATION_BUDGET)
}

pub fn siegel_count_with_budget(p: &LatticePoint, radius: f64, budget: u64) -> Result<u64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
    }
    enumerate::count_in_ball(&*reduced_basis(p)?, radius, budget)
}

/// `rho((shortest_vector_len(p) - center) / width)` with the standard bump `rho`.
pub fn shortest_bump(p: &LatticePoint, center: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("width {width} must be positive")));
    }
    let len = shortest_vector_len(p)?;
    Ok(bump_profile((len - center) / width))
}

/// Left translation `g . L`, followed by reduction.
pub fn apply(g: &GroupElement, p: &LatticePoint) -> Result<LatticePoint> {
    if g.dims().k0() != p.dims.k0() {
        return Err(Error::DimensionMismatch {
            expected: p.dims.k0(),
            actual: g.dims().k0(),
        });
    }
    reduce(&LatticePoint::unchecked(p.dims, g.entries() * &p.basis))
}

/// Whether `q` spans the same lattice as `p`: `p^{-1} q` must be an integer
/// matrix of determinant `+-1` up to `tol`.
pub fn same_lattice(p: &LatticePoint, q: &LatticePoint, tol: f64) -> bool {
    let Some(inv) = p.basis.clone().try_inverse() else {
        return false;
    };
    let t = inv * &q.basis;
    if t.iter().any(|v| (v - v.round()).abs() > tol) {
        return false;
    }
    let rounded = t.map(f64::round);
    (rounded.determinant().abs() - 1.0).abs() < 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{embed_u, DiagonalSample, UnipotentParam};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d2() -> Dims {
        Dims::new(1, 1).unwrap()
    }

    fn lat(d: Dims, rows: &[f64]) -> LatticePoint {
        let n = d.k0();
        LatticePoint::new(d, DMatrix::from_row_slice(n, n, rows)).unwrap()
    }

    /// Brute-force shortest length over coefficients in `[-r, r]^n`.
    fn brute_shortest(b: &DMatrix<f64>, r: i64) -> f64 {
        let n = b.ncols();
        let mut best = f64::INFINITY;
        let mut c = vec![-r; n];
        loop {
            if c.iter().any(|&x| x != 0) {
                let v = b * nalgebra::DVector::from_iterator(n, c.iter().map(|&x| x as f64));
                best = best.min(v.norm());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                c[i] += 1;
                if c[i] <= r {
                    break;
                }
                c[i] = -r;
                i += 1;
            }
        }
    }

    fn brute_count(b: &DMatrix<f64>, r: i64, radius: f64) -> u64 {
        let n = b.ncols();
        let mut count = 0;
        let mut c = vec![-r; n];
        loop {
            if c.iter().any(|&x| x != 0) {
                let v = b * nalgebra::DVector::from_iterator(n, c.iter().map(|&x| x as f64));
                if v.norm_squared() <= radius * radius {
                    count += 1;
                }
            }
            let mut i = 0;
            loop {
                if i == n {
                    return count;
                }
                c[i] += 1;
                if c[i] <= r {
                    break;
                }
                c[i] = -r;
                i += 1;
            }
        }
    }

    fn random_unimodular(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        // Product of elementary integer shears keeps entries integral with det 1.
        let mut t = DMatrix::<f64>::identity(n, n);
        for _ in 0..3 * n {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n);
            if i == j {
                j = (j + 1) % n;
            }
            let c = rng.random_range(-2i64..=2) as f64;
            let mut e = DMatrix::<f64>::identity(n, n);
            e[(i, j)] = c;
            let candidate = &t * e;
            if candidate.iter().all(|v| v.abs() <= 5.0) {
                t = candidate;
            }
        }
        t
    }

    fn random_lattice(d: Dims, rng: &mut impl Rng) -> LatticePoint {
        let n = d.k0();
        let free: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DiagonalSample::from_free(d, &free).unwrap().to_group_element();
        let x = UnipotentParam::new(d, (0..d.k()).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let g = a.mul(&embed_u(&x)).unwrap();
        let m = DMatrix::from_fn(n, n, |i, j| if i > j { rng.random_range(-1.0..1.0) } else { 0.0 });
        let lower = DMatrix::<f64>::identity(n, n) + m;
        LatticePoint::new(d, g.entries() * lower).unwrap()
    }

    #[test]
    fn reduce_identity() {
        let p = LatticePoint::new(d2(), DMatrix::identity(2, 2)).unwrap();
        let r = reduce(&p).unwrap();
        assert_eq!(r.basis(), &DMatrix::identity(2, 2));
        assert!(r.is_reduced());
    }

    #[test]
    fn reduce_skewed_basis() {
        let p = lat(d2(), &[1.0, 100.0, 0.0, 1.0]);
        let r = reduce(&p).unwrap();
        assert!(same_lattice(&p, &r, 1e-9));
        let max_col = (0..2).map(|j| r.basis().column(j).norm()).fold(0.0, f64::max);
        // Oracle: among all pairs of lattice vectors B(a, b) with |a|, |b| <= 200
        // forming a unimodular change of basis, the smallest achievable longest
        // column.
        let mut short = Vec::new();
        for a in -200i64..=200 {
            for b in -200i64..=200 {
                let v = (a as f64 + 100.0 * b as f64, b as f64);
                let n = (v.0 * v.0 + v.1 * v.1).sqrt();
                if n <= 2f64.sqrt() + 1e-12 && (a, b) != (0, 0) {
                    short.push((a, b, n));
                }
            }
        }
        let mut oracle = f64::INFINITY;
        for &(a, b, n1) in &short {
            for &(c, dd, n2) in &short {
                if (a * dd - b * c).abs() == 1 {
                    oracle = oracle.min(n1.max(n2));
                }
            }
        }
        assert!(max_col <= 2f64.sqrt() + 1e-12);
        assert!((max_col - oracle).abs() < 1e-12);
        assert!((r.det().abs() - p.det().abs()).abs() < 1e-9);
    }

    #[test]
    fn reduce_output_is_lll_reduced_and_same_lattice() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(k1, k2) in &[(1, 1), (2, 1), (2, 2), (3, 2)] {
            let d = Dims::new(k1, k2).unwrap();
            for _ in 0..100 {
                let p = random_lattice(d, &mut rng);
                let r = reduce(&p).unwrap();
                assert!(is_lll_reduced(r.basis(), LOVASZ_DELTA));
                assert!(same_lattice(&p, &r, 1e-8));
                assert!((r.det().abs() - p.det().abs()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reduce_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = Dims::new(2, 1).unwrap();
        for _ in 0..100 {
            let p = random_lattice(d, &mut rng);
            let r1 = reduce(&p).unwrap();
            let r2 = LatticePoint::unchecked(d, r1.basis().clone());
            let r2 = reduce(&r2).unwrap();
            assert!((r1.gram() - r2.gram()).norm() <= 1e-10);
        }
    }

    #[test]
    fn reduce_rejects_near_singular() {
        let d = d2();
        let p = LatticePoint::unchecked(d, DMatrix::from_row_slice(2, 2, &[1e8, 0.0, 0.0, 1e-8]));
        match reduce(&p) {
            Err(Error::Reduction { basis, .. }) => assert_eq!(basis, *p.basis()),
            other => panic!("expected reduction failure, got {other:?}"),
        }
    }

    #[test]
    fn shortest_examples() {
        let d = d2();
        assert_eq!(shortest_vector_len(&LatticePoint::standard(d)).unwrap(), 1.0);
        let p = lat(d, &[2.0, 0.0, 0.0, 0.5]);
        assert!((shortest_vector_len(&p).unwrap() - 0.5).abs() < 1e-15);
        let p = lat(d, &[1.0, 0.5, 0.0, 1.0]);
        let oracle = brute_shortest(p.basis(), 10);
        assert!((oracle - 1.0).abs() < 1e-15);
        assert!((shortest_vector_len(&p).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn shortest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &(k1, k2) in &[(1, 1), (2, 1), (2, 2)] {
            let d = Dims::new(k1, k2).unwrap();
            for _ in 0..30 {
                let p = reduce(&random_lattice(d, &mut rng)).unwrap();
                let r = if d.k0() == 4 { 3 } else { 6 };
                let brute = brute_shortest(p.basis(), r);
                assert!((shortest_vector_len(&p).unwrap() - brute).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn siegel_examples() {
        let z2 = LatticePoint::standard(d2());
        assert_eq!(siegel_count(&z2, 0.5).unwrap(), 0);
        assert_eq!(siegel_count(&z2, 1.5).unwrap(), 8);
        assert_eq!(brute_count(z2.basis(), 3, 1.5), 8);
        assert_eq!(siegel_count(&z2, 1.0).unwrap(), 4);
        assert!(siegel_count(&z2, 0.0).is_err());
    }

    #[test]
    fn siegel_matches_brute_force_and_is_even_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let d = Dims::new(2, 1).unwrap();
        for _ in 0..30 {
            let p = reduce(&random_lattice(d, &mut rng)).unwrap();
            let mut prev = 0;
            for &r in &[0.5, 1.0, 1.3, 1.7, 2.2] {
                let c = siegel_count(&p, r).unwrap();
                assert_eq!(c, brute_count(p.basis(), 8, r));
                assert_eq!(c % 2, 0);
                assert!(c >= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn siegel_budget_exceeded() {
        let z2 = LatticePoint::standard(d2());
        assert!(matches!(
            siegel_count_with_budget(&z2, 50.0, 1000),
            Err(Error::BudgetExceeded { budget: 1000 })
        ));
    }

    #[test]
    fn invariance_under_unimodular_change_of_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for &(k1, k2) in &[(1, 1), (2, 1), (2, 2)] {
            let d = Dims::new(k1, k2).unwrap();
            let base = random_lattice(d, &mut rng);
            let len = shortest_vector_len(&base).unwrap();
            let count = siegel_count(&base, 1.4).unwrap();
            for _ in 0..100 {
                let t = random_unimodular(d.k0(), &mut rng);
                let q = LatticePoint::new(d, base.basis() * t).unwrap();
                assert!((shortest_vector_len(&q).unwrap() - len).abs() <= 1e-9);
                assert_eq!(siegel_count(&q, 1.4).unwrap(), count);
            }
        }
    }

    #[test]
    fn bump_examples() {
        let z2 = LatticePoint::standard(d2());
        assert_eq!(shortest_bump(&z2, 1.0, 0.3).unwrap(), 1.0);
        assert_eq!(shortest_bump(&z2, 2.0, 0.5).unwrap(), 0.0);
        assert_eq!(shortest_bump(&z2, 1.5, 0.5).unwrap(), 0.0);
        let p = lat(d2(), &[1.25, 0.0, 0.0, 0.8]);
        // shortest = 0.8: (0.8 - 1.0) / 0.5 = -0.4
        let expected = (1.0 - 1.0 / (1.0 - 0.16f64)).exp();
        assert!((shortest_bump(&p, 1.0, 0.5).unwrap() - expected).abs() < 1e-15);
        assert!(shortest_bump(&z2, 1.0, 0.0).is_err());
    }

    #[test]
    fn bump_is_lipschitz_under_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let d = d2();
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let p = random_lattice(d, &mut rng);
            let eps = 1e-6;
            let pert = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-eps..eps));
            let q = LatticePoint::unchecked(d, p.basis() + &pert);
            let b1 = shortest_bump(&p, 0.8, 0.4).unwrap();
            let b2 = shortest_bump(&q, 0.8, 0.4).unwrap();
            worst = worst.max((b1 - b2).abs() / pert.norm());
        }
        assert!(worst.is_finite() && worst < 100.0, "empirical Lipschitz constant {worst}");
    }

    #[test]
    fn apply_examples() {
        let d = d2();
        let z2 = LatticePoint::standard(d);
        let id = GroupElement::identity(d);
        assert!(same_lattice(&apply(&id, &z2).unwrap(), &z2, 1e-12));

        let a = DiagonalSample::from_free(d, &[2f64.ln()]).unwrap().to_group_element();
        let p = apply(&a, &z2).unwrap();
        assert!((shortest_vector_len(&p).unwrap() - 0.5).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let g = random_lattice(d, &mut rng);
            let h = random_lattice(d, &mut rng);
            let g = GroupElement::with_tolerance(d, g.basis().clone(), 1e-8).unwrap();
            let h = GroupElement::with_tolerance(d, h.basis().clone(), 1e-8).unwrap();
            let p = random_lattice(d, &mut rng);
            let lhs = apply(&g, &apply(&h, &p).unwrap()).unwrap();
            let rhs = apply(&g.mul(&h).unwrap(), &p).unwrap();
            assert!(same_lattice(&lhs, &rhs, 1e-8));
        }
    }

    #[test]
    fn row_major_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let d = Dims::new(2, 1).unwrap();
        let p = random_lattice(d, &mut rng);
        let q = LatticePoint::from_row_major_string(d, &p.to_row_major_string()).unwrap();
        assert_eq!(p.basis(), q.basis());
    }
}
