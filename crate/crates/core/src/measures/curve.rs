use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// `(t, t^2, ..., t^k)`.
    Moment,
    /// `(t, t, ..., t)`; lies on a line, so it is planar for `k >= 2`.
    PlanarDemo,
    /// Constant `(1/2, ..., 1/2)`.
    ConstantDemo,
    CustomPolynomial,
}

/// A polynomial curve `phi: [0, 1] -> R^k`. Every kind is stored as a
/// coefficient table: row `r` holds the coefficients of coordinate `r` in
/// ascending powers of `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    kind: CurveKind,
    coeffs: Vec<Vec<f64>>,
}

impl CurveSpec {
    pub fn moment(k: usize) -> Self {
        let coeffs = (0..k)
            .map(|r| {
                let mut row = vec![0.0; r + 2];
                row[r + 1] = 1.0;
                row
            })
            .collect();
        CurveSpec {
            kind: CurveKind::Moment,
            coeffs,
        }
    }

    pub fn planar_demo(k: usize) -> Self {
        CurveSpec {
            kind: CurveKind::PlanarDemo,
            coeffs: vec![vec![0.0, 1.0]; k],
        }
    }

    pub fn constant_demo(k: usize) -> Self {
        CurveSpec {
            kind: CurveKind::ConstantDemo,
            coeffs: vec![vec![0.5]; k],
        }
    }

    /// `k` rows of ascending coefficients; rows may have different lengths.
    pub fn custom(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(Vec::is_empty) {
            return Err(Error::InvalidLaw(
                "custom polynomial needs at least one coefficient per coordinate".into(),
            ));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidLaw("custom polynomial coefficient is not finite".into()));
        }
        Ok(CurveSpec {
            kind: CurveKind::CustomPolynomial,
            coeffs,
        })
    }

    /// Builds the named shipped curve, or a custom one from `coeffs`.
    pub fn from_kind(kind: CurveKind, k: usize, coeffs: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let curve = match kind {
            CurveKind::Moment => Self::moment(k),
            CurveKind::PlanarDemo => Self::planar_demo(k),
            CurveKind::ConstantDemo => Self::constant_demo(k),
            CurveKind::CustomPolynomial => Self::custom(coeffs.ok_or_else(|| {
                Error::InvalidLaw("custom_polynomial requires a coefficient table".into())
            })?)?,
        };
        if curve.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: curve.dim(),
            });
        }
        Ok(curve)
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Dimension `k` of the target space.
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().map(|r| r.len() - 1).max().unwrap_or(0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.coeffs.iter().map(|row| horner(row, t)).collect()
    }

    pub fn deriv(&self, t: f64) -> Vec<f64> {
        self.coeffs.iter().map(|row| horner(&derivative(row), t)).collect()
    }

    pub fn second_deriv(&self, t: f64) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|row| horner(&derivative(&derivative(row)), t))
            .collect()
    }

    /// The curve `t -> M phi(t)`.
    pub fn transformed(&self, m: &DMatrix<f64>) -> Result<CurveSpec> {
        let k = self.dim();
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                actual: m.nrows() * m.ncols(),
            });
        }
        let len = self.degree() + 1;
        let mut coeffs = vec![vec![0.0; len]; k];
        for (r, out) in coeffs.iter_mut().enumerate() {
            for (s, row) in self.coeffs.iter().enumerate() {
                for (p, c) in row.iter().enumerate() {
                    out[p] += m[(r, s)] * c;
                }
            }
        }
        CurveSpec::custom(coeffs)
    }
}

fn horner(row: &[f64], t: f64) -> f64 {
    row.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn derivative(row: &[f64]) -> Vec<f64> {
    if row.len() <= 1 {
        return vec![0.0];
    }
    row.iter()
        .enumerate()
        .skip(1)
        .map(|(p, c)| p as f64 * c)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_curve_values() {
        let c = CurveSpec::moment(3);
        assert_eq!(c.eval(2.0), vec![2.0, 4.0, 8.0]);
        assert_eq!(c.deriv(2.0), vec![1.0, 4.0, 12.0]);
        assert_eq!(c.second_deriv(2.0), vec![0.0, 2.0, 12.0]);
        assert_eq!(c.degree(), 3);
    }

    #[test]
    fn demos() {
        assert_eq!(CurveSpec::planar_demo(2).eval(0.3), vec![0.3, 0.3]);
        assert_eq!(CurveSpec::constant_demo(2).deriv(0.3), vec![0.0, 0.0]);
    }

    #[test]
    fn transform_matches_matrix_product() {
        let c = CurveSpec::moment(2);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let mc = c.transformed(&m).unwrap();
        for &t in &[0.0, 0.25, 0.9] {
            let direct = &m * nalgebra::DVector::from_vec(c.eval(t));
            let via = mc.eval(t);
            for r in 0..2 {
                assert!((direct[r] - via[r]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn custom_validation() {
        assert!(CurveSpec::custom(vec![]).is_err());
        assert!(CurveSpec::custom(vec![vec![]]).is_err());
        assert!(CurveSpec::from_kind(CurveKind::CustomPolynomial, 1, None).is_err());
        let sq = CurveSpec::from_kind(CurveKind::CustomPolynomial, 1, Some(vec![vec![0.0, 0.0, 1.0]]))
            .unwrap();
        assert_eq!(sq.eval(0.5), vec![0.25]);
        assert!(CurveSpec::from_kind(CurveKind::Moment, 2, None).unwrap().dim() == 2);
    }
}
