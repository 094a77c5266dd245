use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{shortest_bump, shortest_vector_len, siegel_count, LatticePoint};
use crate::error::{Error, Result};
use crate::group::Dims;

/// Lattice functionals evaluated along walks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// Number of nonzero lattice vectors in the closed ball of the given radius.
    SiegelCount { radius: f64 },
    /// Smooth bump in the length of a shortest vector.
    ShortestBump { center: f64, width: f64 },
    /// Natural log of the length of a shortest vector.
    ShortestLog,
    /// A constant function; useful as a control.
    Constant { value: f64 },
}

impl Observable {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Observable::SiegelCount { radius } if !(radius > 0.0 && radius.is_finite()) => Err(
                Error::InvalidArgument(format!("siegel_count radius {radius} must be positive")),
            ),
            Observable::ShortestBump { width, center }
                if !(width > 0.0 && width.is_finite() && center.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!(
                    "shortest_bump width {width} must be positive"
                )))
            }
            Observable::Constant { value } if !value.is_finite() => Err(Error::InvalidArgument(
                "constant observable must be finite".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Stable identifier used in result files.
    pub fn name(&self) -> String {
        match self {
            Observable::SiegelCount { radius } => format!("siegel_count_r{radius}"),
            Observable::ShortestBump { center, width } => {
                format!("shortest_bump_c{center}_w{width}")
            }
            Observable::ShortestLog => "shortest_log".to_string(),
            Observable::Constant { value } => format!("constant_{value}"),
        }
    }

    pub fn evaluate(&self, p: &LatticePoint) -> Result<f64> {
        match *self {
            Observable::SiegelCount { radius } => siegel_count(p, radius).map(|c| c as f64),
            Observable::ShortestBump { center, width } => shortest_bump(p, center, width),
            Observable::ShortestLog => shortest_vector_len(p).map(f64::ln),
            Observable::Constant { value } => Ok(value),
        }
    }

    /// Mean against the invariant probability measure, where it is known in
    /// closed form. Siegel's mean value theorem gives the ball volume.
    pub fn haar_mean(&self, dims: Dims) -> Option<f64> {
        match *self {
            Observable::SiegelCount { radius } => Some(ball_volume(dims.k0(), radius)),
            Observable::Constant { value } => Some(value),
            _ => None,
        }
    }
}

/// `rho(s) = exp(1 - 1/(1 - s^2))` on `|s| < 1`, zero elsewhere.
pub fn bump_profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Volume of the Euclidean ball of radius `r` in `R^dim`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2 pi / d for the unit ball.
    let mut v = if dim % 2 == 0 { 1.0 } else { 2.0 };
    let mut d = if dim % 2 == 0 { 2 } else { 3 };
    while d <= dim {
        v *= 2.0 * PI / d as f64;
        d += 2;
    }
    v * r.powi(dim as i32)
}
