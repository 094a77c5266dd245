use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Dims, DiagonalSample};

/// Tolerance on `|sum alpha|`.
pub const ALPHA_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// `alpha_i + w_i * Uniform[-1, 1]`.
    UniformBox,
    /// `alpha_i +- w_i` with probability 1/2 each.
    DiscreteTwoPoint,
}

/// One expansion gap: `beta = (alpha_i - alpha_j) / 2` for `i` in the first
/// block and `j` in the second (both 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub i: usize,
    pub j: usize,
    pub beta: f64,
}

/// A compactly supported law on the diagonal group with independent free
/// log-coordinates; the last coordinate is forced by `sum t = 0`, so its
/// half-width is not used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalLawSpec {
    dims: Dims,
    means: Vec<f64>,
    widths: Vec<f64>,
    kind: LawKind,
    gaps: Vec<Gap>,
    beta_min: f64,
    expanding: bool,
}

impl DiagonalLawSpec {
    pub fn new(dims: Dims, means: Vec<f64>, widths: Vec<f64>, kind: LawKind) -> Result<Self> {
        let k0 = dims.k0();
        if means.len() != k0 {
            return Err(Error::DimensionMismatch {
                expected: k0,
                actual: means.len(),
            });
        }
        if widths.len() != k0 {
            return Err(Error::DimensionMismatch {
                expected: k0,
                actual: widths.len(),
            });
        }
        if means.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidLaw("diagonal means must be finite".into()));
        }
        if widths.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidLaw(
                "diagonal half-widths must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = means.iter().sum();
        if !(sum.abs() <= ALPHA_SUM_TOL) {
            return Err(Error::InvalidLaw(format!(
                "diagonal means must sum to zero, got {sum}"
            )));
        }
        let k1 = dims.k1();
        let mut gaps = Vec::with_capacity(dims.k());
        for i in 0..k1 {
            for j in k1..k0 {
                gaps.push(Gap {
                    i,
                    j,
                    beta: (means[i] - means[j]) / 2.0,
                });
            }
        }
        let beta_min = gaps.iter().map(|g| g.beta.abs()).fold(f64::INFINITY, f64::min);
        let expanding = gaps.iter().all(|g| g.beta > 0.0);
        Ok(DiagonalLawSpec {
            dims,
            means,
            widths,
            kind,
            gaps,
            beta_min,
            expanding,
        })
    }

    /// `alpha_i = k2/k0` on the first block and `-k1/k0` on the second, unit half-widths.
    pub fn default_for(dims: Dims) -> Self {
        let (k1, k2, k0) = (dims.k1() as f64, dims.k2() as f64, dims.k0() as f64);
        let means = (0..dims.k0())
            .map(|i| if i < dims.k1() { k2 / k0 } else { -k1 / k0 })
            .collect();
        Self::new(dims, means, vec![1.0; dims.k0()], LawKind::UniformBox)
            .expect("default law is valid")
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    /// `min |beta_ij|`.
    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    /// Whether `alpha_i > alpha_j` for every cross-block pair.
    pub fn is_expanding(&self) -> bool {
        self.expanding
    }

    /// Cross-block pairs, 1-based, with `alpha_i - alpha_j <= 0`.
    pub fn violations(&self) -> Vec<(usize, usize)> {
        self.gaps
            .iter()
            .filter(|g| !(g.beta > 0.0))
            .map(|g| (g.i + 1, g.j + 1))
            .collect()
    }

    /// Whether every free coordinate is deterministic.
    pub fn is_degenerate(&self) -> bool {
        self.widths[..self.dims.k0() - 1].iter().all(|w| *w == 0.0)
    }

    /// Draws `k0 - 1` free coordinates in order and forces the last one.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DiagonalSample {
        let free: Vec<f64> = self.means[..self.dims.k0() - 1]
            .iter()
            .zip(&self.widths)
            .map(|(&a, &w)| {
                let s = match self.kind {
                    LawKind::UniformBox => rng.random_range(-1.0..=1.0),
                    LawKind::DiscreteTwoPoint => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                if w == 0.0 {
                    a
                } else {
                    a + w * s
                }
            })
            .collect();
        DiagonalSample::from_free(self.dims, &free).expect("length matches dims")
    }

    /// Cumulant generating function `log E exp(lambda (X - E X))` of one free
    /// coordinate's centered law.
    pub fn centered_cgf(&self, coord: usize, lambda: f64) -> f64 {
        single_cgf(self.kind, self.widths[coord], lambda)
    }

    /// Centered cumulant generating function of log-coordinate `coord`
    /// (0-based). The forced last coordinate is minus the sum of the free
    /// ones, so its cumulants add up across them.
    pub fn coordinate_cgf(&self, coord: usize, lambda: f64) -> f64 {
        let last = self.dims.k0() - 1;
        if coord == last {
            (0..last).map(|c| self.centered_cgf(c, -lambda)).sum()
        } else {
            self.centered_cgf(coord, lambda)
        }
    }

    /// Largest deviation of coordinate `coord` from its mean in one draw.
    pub fn coordinate_half_range(&self, coord: usize) -> f64 {
        let last = self.dims.k0() - 1;
        if coord == last {
            self.widths[..last].iter().sum()
        } else {
            self.widths[coord]
        }
    }
}

fn single_cgf(kind: LawKind, w: f64, lambda: f64) -> f64 {
    let x = (lambda * w).abs();
    if x == 0.0 {
        return 0.0;
    }
    match kind {
        // log(sinh(x) / x), written to stay finite for large x.
        LawKind::UniformBox => {
            if x < 1e-4 {
                x * x / 6.0 - x.powi(4) / 180.0
            } else {
                x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2 - x.ln()
            }
        }
        // log cosh(x).
        LawKind::DiscreteTwoPoint => x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2,
    }
}
