//! Linear-algebra kernel for `G = SL(k0, R)`, its diagonal subgroup, the
//! abelian unipotent block `U`, and the adjoint representation.
//!
//! Parameters of `U` are vectors of length `k = k1 * k2`, identified with
//! `k1 x k2` matrices in row-major order: entry `(i, j)` of the block lives at
//! index `i * k2 + j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `|det - 1|` for group elements.
pub const DET_TOL: f64 = 1e-9;
/// Default tolerance on `|trace|` for Lie algebra elements.
pub const TRACE_TOL: f64 = 1e-9;

/// Block shape `(k1, k2)` together with the derived `k0 = k1 + k2` and `k = k1 * k2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims", into = "RawDims")]
pub struct Dims {
    k1: usize,
    k2: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDims {
    k1: usize,
    k2: usize,
}

impl TryFrom<RawDims> for Dims {
    type Error = Error;
    fn try_from(raw: RawDims) -> Result<Self> {
        Dims::new(raw.k1, raw.k2)
    }
}

impl From<Dims> for RawDims {
    fn from(d: Dims) -> Self {
        RawDims { k1: d.k1, k2: d.k2 }
    }
}

impl Dims {
    pub fn new(k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::InvalidDims { k1, k2 });
        }
        Ok(Dims { k1, k2 })
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn k0(&self) -> usize {
        self.k1 + self.k2
    }

    pub fn k(&self) -> usize {
        self.k1 * self.k2
    }

    /// Index in the parameter vector of block entry `(i, j)`, zero-based.
    pub fn param_index(&self, i: usize, j: usize) -> usize {
        i * self.k2 + j
    }

    fn check_len(&self, expected: usize, actual: usize) -> Result<()> {
        if expected != actual {
            return Err(Error::DimensionMismatch { expected, actual });
        }
        Ok(())
    }

    fn check_square(&self, m: &DMatrix<f64>) -> Result<()> {
        let n = self.k0();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: m.nrows() * m.ncols(),
            });
        }
        Ok(())
    }
}

/// An element of `SL(k0, R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    dims: Dims,
    entries: DMatrix<f64>,
}

impl GroupElement {
    pub fn new(dims: Dims, entries: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(dims, entries, DET_TOL)
    }

    pub fn with_tolerance(dims: Dims, entries: DMatrix<f64>, det_tol: f64) -> Result<Self> {
        dims.check_square(&entries)?;
        let det = entries.determinant();
        if !((det - 1.0).abs() <= det_tol) {
            return Err(Error::Determinant {
                det,
                target: 1.0,
                tol: det_tol,
            });
        }
        Ok(GroupElement { dims, entries })
    }

    /// Products of valid elements stay in the group up to roundoff, so no
    /// determinant check is repeated here.
    pub(crate) fn from_product(dims: Dims, entries: DMatrix<f64>) -> Self {
        GroupElement { dims, entries }
    }

    pub fn identity(dims: Dims) -> Self {
        GroupElement {
            dims,
            entries: DMatrix::identity(dims.k0(), dims.k0()),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn det(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn mul(&self, rhs: &GroupElement) -> Result<GroupElement> {
        self.dims.check_len(self.dims.k0(), rhs.dims.k0())?;
        Ok(GroupElement::from_product(
            self.dims,
            &self.entries * &rhs.entries,
        ))
    }

    pub fn inverse(&self) -> Result<GroupElement> {
        let inv = self.entries.clone().try_inverse().ok_or(Error::Singular)?;
        Ok(GroupElement::from_product(self.dims, inv))
    }
}

/// Log-coordinates `t` of `diag(e^{t_1}, ..., e^{t_{k0}})`; the last
/// coordinate is always minus the sum of the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSample {
    dims: Dims,
    log_entries: Vec<f64>,
}

impl DiagonalSample {
    /// Builds a sample from its first `k0 - 1` log-coordinates.
    pub fn from_free(dims: Dims, free: &[f64]) -> Result<Self> {
        dims.check_len(dims.k0() - 1, free.len())?;
        let mut log_entries = free.to_vec();
        log_entries.push(-free.iter().sum::<f64>());
        Ok(DiagonalSample { dims, log_entries })
    }

    /// Builds a sample from all `k0` log-coordinates; the last one is
    /// replaced by minus the sum of the others after checking it agrees to `tol`.
    pub fn from_log_entries(dims: Dims, t: &[f64], tol: f64) -> Result<Self> {
        dims.check_len(dims.k0(), t.len())?;
        let sum: f64 = t.iter().sum();
        if !(sum.abs() <= tol) {
            return Err(Error::InvalidArgument(format!(
                "log-entries sum to {sum}, expected 0"
            )));
        }
        Self::from_free(dims, &t[..t.len() - 1])
    }

    pub fn identity(dims: Dims) -> Self {
        DiagonalSample {
            dims,
            log_entries: vec![0.0; dims.k0()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn log_entries(&self) -> &[f64] {
        &self.log_entries
    }

    pub fn inverse(&self) -> DiagonalSample {
        let free: Vec<f64> = self.log_entries[..self.dims.k0() - 1]
            .iter()
            .map(|t| -t)
            .collect();
        DiagonalSample::from_free(self.dims, &free).expect("same dims")
    }

    /// `min_i t_i`.
    pub fn floor(&self) -> f64 {
        self.log_entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `min t_i + t_j` over `i` in the first block and `j` in the second.
    pub fn dblfloor(&self) -> f64 {
        let k1 = self.dims.k1();
        let mut best = f64::INFINITY;
        for &ti in &self.log_entries[..k1] {
            for &tj in &self.log_entries[k1..] {
                best = best.min(ti + tj);
            }
        }
        best
    }

    pub fn to_group_element(&self) -> GroupElement {
        let diag: Vec<f64> = self.log_entries.iter().map(|t| t.exp()).collect();
        GroupElement::from_product(
            self.dims,
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
        )
    }
}

/// A point of `R^k` viewed as the upper-right `k1 x k2` block of `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnipotentParam {
    dims: Dims,
    x: Vec<f64>,
}

impl UnipotentParam {
    pub fn new(dims: Dims, x: Vec<f64>) -> Result<Self> {
        dims.check_len(dims.k(), x.len())?;
        Ok(UnipotentParam { dims, x })
    }

    pub fn zero(dims: Dims) -> Self {
        UnipotentParam {
            dims,
            x: vec![0.0; dims.k()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &UnipotentParam) -> Result<UnipotentParam> {
        self.dims.check_len(self.dims.k(), other.x.len())?;
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect();
        Ok(UnipotentParam { dims: self.dims, x })
    }

    pub fn neg(&self) -> UnipotentParam {
        UnipotentParam {
            dims: self.dims,
            x: self.x.iter().map(|v| -v).collect(),
        }
    }

    /// The `k1 x k2` block matrix.
    pub fn block(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dims.k1(), self.dims.k2(), &self.x)
    }
}

/// An element of `sl(k0, R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraElement {
    dims: Dims,
    entries: DMatrix<f64>,
}

impl LieAlgebraElement {
    pub fn new(dims: Dims, entries: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(dims, entries, TRACE_TOL)
    }

    pub fn with_tolerance(dims: Dims, entries: DMatrix<f64>, trace_tol: f64) -> Result<Self> {
        dims.check_square(&entries)?;
        let trace = entries.trace();
        if !(trace.abs() <= trace_tol) {
            return Err(Error::Trace {
                trace,
                tol: trace_tol,
            });
        }
        Ok(LieAlgebraElement { dims, entries })
    }

    pub(crate) fn from_conjugate(dims: Dims, entries: DMatrix<f64>) -> Self {
        LieAlgebraElement { dims, entries }
    }

    /// The elementary matrix `E_{ij}` (zero-based, `i != j`).
    pub fn elementary(dims: Dims, i: usize, j: usize) -> Result<Self> {
        let n = dims.k0();
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidArgument(format!(
                "elementary matrix E_({i},{j}) is not traceless off-diagonal in dimension {n}"
            )));
        }
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        Ok(LieAlgebraElement { dims, entries: m })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn scale(&self, s: f64) -> LieAlgebraElement {
        LieAlgebraElement {
            dims: self.dims,
            entries: &self.entries * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|v| *v == 0.0)
    }
}

/// A positive diagonal linear map on `R^k`, stored by the logarithms of its
/// coefficients so that long products neither overflow nor underflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMap {
    log_coeffs: Vec<f64>,
}

impl DiagonalMap {
    pub fn identity(k: usize) -> Self {
        DiagonalMap {
            log_coeffs: vec![0.0; k],
        }
    }

    pub fn from_log_coeffs(log_coeffs: Vec<f64>) -> Self {
        DiagonalMap { log_coeffs }
    }

    pub fn from_coeffs(coeffs: &[f64]) -> Result<Self> {
        if let Some(c) = coeffs.iter().find(|c| !(**c > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "diagonal map coefficient {c} is not positive"
            )));
        }
        Ok(DiagonalMap {
            log_coeffs: coeffs.iter().map(|c| c.ln()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.log_coeffs.len()
    }

    pub fn log_coeffs(&self) -> &[f64] {
        &self.log_coeffs
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.log_coeffs.iter().map(|l| l.exp()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.log_coeffs)
            .map(|(v, l)| v * l.exp())
            .collect()
    }

    /// Coordinatewise product of the two maps.
    pub fn compose(&self, other: &DiagonalMap) -> DiagonalMap {
        DiagonalMap {
            log_coeffs: self
                .log_coeffs
                .iter()
                .zip(&other.log_coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Result<DiagonalMap> {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {s} is not positive")));
        }
        let ls = s.ln();
        Ok(DiagonalMap {
            log_coeffs: self.log_coeffs.iter().map(|l| l + ls).collect(),
        })
    }

    pub fn log_det(&self) -> f64 {
        self.log_coeffs.iter().sum()
    }
}

/// `u(x) = [[I, M], [0, I]]`.
pub fn embed_u(x: &UnipotentParam) -> GroupElement {
    let dims = x.dims();
    let (k1, k2) = (dims.k1(), dims.k2());
    let mut m = DMatrix::identity(dims.k0(), dims.k0());
    for i in 0..k1 {
        for j in 0..k2 {
            m[(i, k1 + j)] = x.as_slice()[dims.param_index(i, j)];
        }
    }
    GroupElement::from_product(dims, m)
}

/// The diagonal map `C_a` with `a^{-1} u(x) a = u(C_a x)`; coefficient
/// `(i, j)` is `exp(t_{k1+j} - t_i)`.
pub fn conj_scaling(a: &DiagonalSample) -> DiagonalMap {
    let dims = a.dims();
    let t = a.log_entries();
    let k1 = dims.k1();
    let mut log_coeffs = Vec::with_capacity(dims.k());
    for i in 0..k1 {
        for j in 0..dims.k2() {
            log_coeffs.push(t[k1 + j] - t[i]);
        }
    }
    DiagonalMap { log_coeffs }
}

/// `theta_i(a_1, ..., a_i) = C_{a_1} ... C_{a_i}`.
pub fn theta(word: &[DiagonalSample]) -> Result<DiagonalMap> {
    let first = word.first().ok_or(Error::Empty("theta needs at least one sample"))?;
    let dims = first.dims();
    let mut acc = DiagonalMap::identity(dims.k());
    for a in word {
        dims.check_len(dims.k0(), a.log_entries().len())?;
        acc = acc.compose(&conj_scaling(a));
    }
    Ok(acc)
}

/// `Pi(a_1, ..., a_n) = a_1 ... a_n` in log-coordinates.
pub fn product_pi(word: &[DiagonalSample]) -> Result<DiagonalSample> {
    let first = word.first().ok_or(Error::Empty("product needs at least one sample"))?;
    let dims = first.dims();
    let mut free = vec![0.0; dims.k0() - 1];
    for a in word {
        dims.check_len(dims.k0(), a.log_entries().len())?;
        for (acc, t) in free.iter_mut().zip(a.log_entries()) {
            *acc += t;
        }
    }
    DiagonalSample::from_free(dims, &free)
}

/// `Ad(g) v = g v g^{-1}`.
pub fn ad_action(g: &GroupElement, v: &LieAlgebraElement) -> Result<LieAlgebraElement> {
    g.dims().check_len(g.dims().k0(), v.dims().k0())?;
    let inv = g.entries().clone().try_inverse().ok_or(Error::Singular)?;
    Ok(LieAlgebraElement::from_conjugate(
        v.dims(),
        g.entries() * v.entries() * inv,
    ))
}

/// Closed-form `Ad(u(x)) v` for `v = [[A, B], [C, D]]`:
/// `[[A + xC, B - Ax + xD - xCx], [C, D - Cx]]`.
pub fn ad_unipotent(x: &UnipotentParam, v: &LieAlgebraElement) -> LieAlgebraElement {
    let dims = v.dims();
    let (k1, k2) = (dims.k1(), dims.k2());
    let e = v.entries();
    let a = e.view((0, 0), (k1, k1)).into_owned();
    let b = e.view((0, k1), (k1, k2)).into_owned();
    let c = e.view((k1, 0), (k2, k1)).into_owned();
    let d = e.view((k1, k1), (k2, k2)).into_owned();
    let m = x.block();
    let xc = &m * &c;
    let top_left = &a + &xc;
    let top_right = &b - &a * &m + &m * &d - &xc * &m;
    let bottom_right = &d - &c * &m;
    let mut out = DMatrix::zeros(dims.k0(), dims.k0());
    out.view_mut((0, 0), (k1, k1)).copy_from(&top_left);
    out.view_mut((0, k1), (k1, k2)).copy_from(&top_right);
    out.view_mut((k1, 0), (k2, k1)).copy_from(&c);
    out.view_mut((k1, k1), (k2, k2)).copy_from(&bottom_right);
    LieAlgebraElement::from_conjugate(dims, out)
}

/// Euclidean projection onto the Lie algebra of `U`: the upper-right block.
pub fn q_project(v: &LieAlgebraElement) -> UnipotentParam {
    let dims = v.dims();
    let k1 = dims.k1();
    let mut x = Vec::with_capacity(dims.k());
    for i in 0..k1 {
        for j in 0..dims.k2() {
            x.push(v.entries()[(i, k1 + j)]);
        }
    }
    UnipotentParam { dims, x }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(k1: usize, k2: usize) -> Dims {
        Dims::new(k1, k2).unwrap()
    }

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn random_diag(d: Dims, rng: &mut impl Rng, scale: f64) -> DiagonalSample {
        let free: Vec<f64> = (0..d.k0() - 1)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        DiagonalSample::from_free(d, &free).unwrap()
    }

    fn random_param(d: Dims, rng: &mut impl Rng) -> UnipotentParam {
        UnipotentParam::new(d, (0..d.k()).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
    }

    fn random_traceless(d: Dims, rng: &mut impl Rng) -> LieAlgebraElement {
        let n = d.k0();
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let tr = m.trace() / n as f64;
        for i in 0..n {
            m[(i, i)] -= tr;
        }
        LieAlgebraElement::with_tolerance(d, m, 1e-12).unwrap()
    }

    #[test]
    fn dims_derived() {
        let d = dims(2, 3);
        assert_eq!((d.k0(), d.k()), (5, 6));
        assert!(Dims::new(0, 1).is_err());
    }

    #[test]
    fn embed_examples() {
        let d = dims(1, 1);
        assert_eq!(embed_u(&UnipotentParam::zero(d)).entries(), &DMatrix::identity(2, 2));
        let u = embed_u(&UnipotentParam::new(d, vec![3.0]).unwrap());
        assert_eq!(u.entries(), &DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, 1.0]));
        assert_eq!(u.det(), 1.0);

        let d = dims(1, 2);
        let x = UnipotentParam::new(d, vec![1.0, 2.0]).unwrap();
        let p = embed_u(&x).mul(&embed_u(&x.neg())).unwrap();
        assert_eq!(p.entries(), &DMatrix::identity(3, 3));
        assert!(UnipotentParam::new(d, vec![1.0]).is_err());
    }

    #[test]
    fn embed_is_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(k1, k2) in &[(1, 1), (2, 1), (1, 2), (2, 2), (3, 2)] {
            let d = dims(k1, k2);
            for _ in 0..50 {
                let x = random_param(d, &mut rng);
                let y = random_param(d, &mut rng);
                let lhs = embed_u(&x).mul(&embed_u(&y)).unwrap();
                let rhs = embed_u(&x.add(&y).unwrap());
                assert_eq!(lhs.entries(), rhs.entries());
            }
        }
    }

    #[test]
    fn conj_scaling_examples() {
        let d = dims(1, 1);
        assert_eq!(conj_scaling(&DiagonalSample::identity(d)).coeffs(), vec![1.0]);

        // a = diag(2, 1/2): oracle by explicit triple product on x = 1.
        let a = DiagonalSample::from_free(d, &[2f64.ln()]).unwrap();
        let x = UnipotentParam::new(d, vec![1.0]).unwrap();
        let g = a.to_group_element();
        let triple = g.inverse().unwrap().entries() * embed_u(&x).entries() * g.entries();
        let c = conj_scaling(&a).coeffs();
        assert!((triple[(0, 1)] - 0.25).abs() < 1e-15);
        assert!((c[0] - triple[(0, 1)]).abs() < 1e-15);

        let d = dims(2, 1);
        let s = 0.7;
        let a = DiagonalSample::from_free(d, &[s, 0.0]).unwrap();
        let c = conj_scaling(&a).coeffs();
        assert!((c[0] - (-2.0 * s).exp()).abs() < 1e-15);
        assert!((c[1] - (-s).exp()).abs() < 1e-15);
    }

    #[test]
    fn conjugation_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(k1, k2) in &[(1, 1), (2, 1), (1, 2), (2, 2)] {
            let d = dims(k1, k2);
            for _ in 0..1000 {
                let a = random_diag(d, &mut rng, 2.0);
                let x = random_param(d, &mut rng);
                let g = a.to_group_element();
                let lhs = g.inverse().unwrap().entries() * embed_u(&x).entries() * g.entries();
                let cx = UnipotentParam::new(d, conj_scaling(&a).apply(x.as_slice())).unwrap();
                let rhs = embed_u(&cx);
                let ux = embed_u(&x);
                assert!((&lhs - rhs.entries()).norm() <= 1e-10 * ux.entries().norm());
            }
        }
    }

    #[test]
    fn theta_examples() {
        let d = dims(1, 1);
        let id = DiagonalSample::identity(d);
        assert_eq!(theta(&[id]).unwrap().coeffs(), vec![1.0]);
        let a = DiagonalSample::from_free(d, &[2f64.ln()]).unwrap();
        let t2 = theta(&[a.clone(), a.clone()]).unwrap().coeffs();
        assert!((t2[0] - 1.0 / 16.0).abs() < 1e-15);
        let c = conj_scaling(&a).coeffs();
        assert!((t2[0] - c[0] * c[0]).abs() < 1e-15);
        assert!(theta(&[]).is_err());
    }

    #[test]
    fn product_examples() {
        let d = dims(1, 1);
        let id = DiagonalSample::identity(d);
        assert_eq!(product_pi(&[id.clone(), id]).unwrap().log_entries(), &[0.0, 0.0]);
        let a = DiagonalSample::from_free(d, &[1.0]).unwrap();
        assert_eq!(product_pi(&[a.clone(), a.clone()]).unwrap().log_entries(), &[2.0, -2.0]);
        let b = DiagonalSample::from_free(d, &[-1.0]).unwrap();
        assert_eq!(product_pi(&[a, b]).unwrap().log_entries(), &[0.0, 0.0]);
        assert!(product_pi(&[]).is_err());
    }

    #[test]
    fn floors() {
        let d = dims(2, 1);
        let a = DiagonalSample::from_free(d, &[0.4, 0.1]).unwrap();
        assert!((a.floor() + 0.5).abs() < 1e-15);
        assert!((a.dblfloor() - (0.1 - 0.5)).abs() < 1e-15);
        assert_eq!(a.log_entries().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn ad_action_examples() {
        let d = dims(1, 1);
        let v = LieAlgebraElement::new(d, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])).unwrap();
        let id = GroupElement::identity(d);
        assert_eq!(ad_action(&id, &v).unwrap(), v);

        for &x in &[-2.0, 0.5, 3.0] {
            let p = UnipotentParam::new(d, vec![x]).unwrap();
            let r = ad_action(&embed_u(&p), &v).unwrap();
            let expected = DMatrix::from_row_slice(2, 2, &[x, -x * x, 1.0, -x]);
            assert!(rel_frob(r.entries(), &expected) < 1e-12);
            assert!(r.trace().abs() < 1e-12);
            let q = q_project(&r);
            assert!((q.as_slice()[0] + x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn ad_block_formula_matches_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(k1, k2) in &[(1, 1), (2, 1), (1, 2), (2, 2)] {
            let d = dims(k1, k2);
            for _ in 0..1000 {
                let x = random_param(d, &mut rng);
                let v = random_traceless(d, &mut rng);
                let direct = ad_action(&embed_u(&x), &v).unwrap();
                let block = ad_unipotent(&x, &v);
                assert!(rel_frob(block.entries(), direct.entries()) < 1e-10);
                assert!(direct.trace().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ad_cocycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = dims(2, 1);
        for _ in 0..200 {
            let g = random_diag(d, &mut rng, 1.0)
                .to_group_element()
                .mul(&embed_u(&random_param(d, &mut rng)))
                .unwrap();
            let h = embed_u(&random_param(d, &mut rng))
                .mul(&random_diag(d, &mut rng, 1.0).to_group_element())
                .unwrap();
            let v = random_traceless(d, &mut rng);
            let lhs = ad_action(&g.mul(&h).unwrap(), &v).unwrap();
            let rhs = ad_action(&g, &ad_action(&h, &v).unwrap()).unwrap();
            assert!(rel_frob(lhs.entries(), rhs.entries()) < 1e-9);
        }
    }

    #[test]
    fn q_project_examples() {
        let d = dims(2, 1);
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 2)] = 1.5;
        m[(1, 2)] = -2.0;
        let v = LieAlgebraElement::new(d, m).unwrap();
        assert_eq!(q_project(&v).as_slice(), &[1.5, -2.0]);

        let mut m = DMatrix::zeros(3, 3);
        m[(1, 0)] = 1.0;
        m[(2, 0)] = 4.0;
        m[(2, 1)] = -1.0;
        let v = LieAlgebraElement::new(d, m).unwrap();
        assert_eq!(q_project(&v).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn invariant_violations_reported() {
        let d = dims(1, 1);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(GroupElement::new(d, m.clone()), Err(Error::Determinant { .. })));
        assert!(matches!(LieAlgebraElement::new(d, m), Err(Error::Trace { .. })));
        assert!(DiagonalSample::from_log_entries(d, &[0.5, 0.6], 1e-12).is_err());
    }
}
