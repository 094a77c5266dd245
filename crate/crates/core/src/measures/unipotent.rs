use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::group::{Dims, UnipotentParam};

/// The auxiliary component of a mixture law on `R^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxLaw {
    None,
    UniformBall { radius: f64 },
    PointMass { x: Vec<f64> },
}

impl AuxLaw {
    fn validate(&self, k: usize) -> Result<()> {
        match self {
            AuxLaw::None => Ok(()),
            AuxLaw::UniformBall { radius } if !(radius.is_finite() && *radius > 0.0) => Err(
                Error::InvalidLaw(format!("uniform_ball radius {radius} must be positive")),
            ),
            AuxLaw::PointMass { x } if x.len() != k => Err(Error::DimensionMismatch {
                expected: k,
                actual: x.len(),
            }),
            AuxLaw::PointMass { x } if x.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidLaw("point_mass location must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        match self {
            AuxLaw::None => unreachable!("validated: c > 0 requires an auxiliary law"),
            AuxLaw::UniformBall { radius } => uniform_ball(k, *radius, rng),
            AuxLaw::PointMass { x } => x.clone(),
        }
    }
}

/// Uniform draw from the closed Euclidean ball of the given radius in `R^k`.
pub fn uniform_ball<R: Rng + ?Sized>(k: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
            return v.into_iter().map(|x| x * r / norm).collect();
        }
    }
}

/// `c * aux + (1 - c) * phi_* Lebesgue[0, 1]`, pushed into `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnipotentLawSpec {
    dims: Dims,
    curve: CurveSpec,
    mixture: f64,
    aux: AuxLaw,
}

impl UnipotentLawSpec {
    pub fn new(dims: Dims, curve: CurveSpec, mixture: f64, aux: AuxLaw) -> Result<Self> {
        if curve.dim() != dims.k() {
            return Err(Error::DimensionMismatch {
                expected: dims.k(),
                actual: curve.dim(),
            });
        }
        if !(0.0..=1.0).contains(&mixture) {
            return Err(Error::InvalidLaw(format!(
                "mixture weight {mixture} must lie in [0, 1]"
            )));
        }
        aux.validate(dims.k())?;
        if mixture > 0.0 && aux == AuxLaw::None {
            return Err(Error::InvalidLaw(
                "a positive mixture weight needs an auxiliary law".into(),
            ));
        }
        Ok(UnipotentLawSpec {
            dims,
            curve,
            mixture,
            aux,
        })
    }

    /// The pure curve law on the moment curve.
    pub fn moment(dims: Dims) -> Self {
        Self::new(dims, CurveSpec::moment(dims.k()), 0.0, AuxLaw::None).expect("valid")
    }

    /// Always returns `x`.
    pub fn point_mass(dims: Dims, x: Vec<f64>) -> Result<Self> {
        Self::new(
            dims,
            CurveSpec::moment(dims.k()),
            1.0,
            AuxLaw::PointMass { x },
        )
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }

    pub fn mixture(&self) -> f64 {
        self.mixture
    }

    pub fn aux(&self) -> &AuxLaw {
        &self.aux
    }

    /// Whether every draw is the zero parameter.
    pub fn is_zero(&self) -> bool {
        self.mixture == 1.0 && matches!(&self.aux, AuxLaw::PointMass { x } if x.iter().all(|v| *v == 0.0))
    }

    /// Draw order: the mixture coin (only when `0 < c < 1`), then the component.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnipotentParam {
        let k = self.dims.k();
        let use_aux = if self.mixture == 0.0 {
            false
        } else if self.mixture == 1.0 {
            true
        } else {
            rng.random::<f64>() < self.mixture
        };
        let x = if use_aux {
            self.aux.sample(k, rng)
        } else {
            self.curve.eval(rng.random::<f64>())
        };
        UnipotentParam::new(self.dims, x).expect("length k")
    }
}
