//! Direct reconstruction: sampling configurations on a level set `ξ(x) = z`.

use crate::error::{Error, Result};
use crate::model::System;
use crate::rng::RandomStream;

/// Approximate conditional law `ν̄(·|z)` on the level set.
///
/// Densities are taken relative to the surface measure `δ(ξ(x) - z) dx`, so
/// that the microscopic acceptance test supplies the Jacobian of the level-set
/// parametrization.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectReconstructor {
    /// Three-atom model: `x_a ~ N(1, ε/β)` and `r_c ~ N(1, ε/β)` restricted to
    /// `r_c > 0`, placed at angle `z`. The surface element is `r_c dx_a dr_c`.
    ThreeAtom { epsilon: f64, beta: f64 },
    /// Identity coordinate: the level set is the single point `x = z`.
    Identity,
}

impl DirectReconstructor {
    pub fn new(system: &System, beta: f64) -> Result<Self> {
        match system {
            System::ThreeAtom { model, .. } => Ok(Self::ThreeAtom {
                epsilon: model.epsilon(),
                beta,
            }),
            System::DoubleWell { .. } => Ok(Self::Identity),
            System::Alanine { .. } => Err(Error::Capability(
                "direct reconstruction is not available for the alanine model".into(),
            )),
        }
    }

    pub fn sample(&self, z: f64, rng: &mut RandomStream) -> Result<Vec<f64>> {
        match *self {
            Self::ThreeAtom { epsilon, beta } => {
                let s = (epsilon / beta).sqrt();
                let xa = 1.0 + s * rng.normal();
                let r = loop {
                    let r = 1.0 + s * rng.normal();
                    if r > 0.0 {
                        break r;
                    }
                };
                Ok(vec![xa, r * z.cos(), r * z.sin()])
            }
            Self::Identity => Ok(vec![z]),
        }
    }

    /// `ln ν̄(x | ξ(x))` up to a constant independent of `z`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        match *self {
            Self::ThreeAtom { epsilon, beta } => {
                let r = x[1].hypot(x[2]);
                if !(r > 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                let da = x[0] - 1.0;
                let dr = r - 1.0;
                Ok(-beta * (da * da + dr * dr) / (2.0 * epsilon) - r.ln())
            }
            Self::Identity => Ok(0.0),
        }
    }
}
