//! Three-atom molecule with a stiff bond pair and a slow bimodal angle.
//!
//! State layout `(x_a, x_c, y_c)`: atom A on the horizontal axis, atom B at
//! the origin, atom C in the plane.

use super::{check_dimension, finite, PotentialModel, ReactionCoordinate};
use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeAtomModel {
    epsilon: f64,
}

impl ThreeAtomModel {
    /// Angular stiffness, `208/2`.
    pub const K_THETA: f64 = 104.0;
    /// Half-distance between the two angular wells.
    pub const DELTA_THETA: f64 = 0.3838;

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Free energy of the angle, `k_θ((θ-π/2)² - δθ²)²`.
    pub fn free_energy(theta: f64) -> f64 {
        let u = theta - FRAC_PI_2;
        let w = u * u - Self::DELTA_THETA * Self::DELTA_THETA;
        Self::K_THETA * w * w
    }

    /// Effective drift `-A'(θ)`.
    pub fn drift(theta: f64) -> f64 {
        -Self::free_energy_derivative(theta)
    }

    fn free_energy_derivative(theta: f64) -> f64 {
        let u = theta - FRAC_PI_2;
        4.0 * Self::K_THETA * u * (u * u - Self::DELTA_THETA * Self::DELTA_THETA)
    }
}

fn polar(x: &[f64]) -> Result<(f64, f64)> {
    let r = x[1].hypot(x[2]);
    if !(r > 0.0) {
        return Err(Error::Domain("r_c must be positive".into()));
    }
    Ok((r, x[2].atan2(x[1])))
}

impl PotentialModel for ThreeAtomModel {
    fn dimension(&self) -> usize {
        3
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, 3)?;
        let (r, theta) = polar(x)?;
        let da = x[0] - 1.0;
        let dr = r - 1.0;
        let v = (da * da + dr * dr) / (2.0 * self.epsilon) + Self::free_energy(theta);
        finite(v, "three-atom energy")
    }

    fn energy_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dimension(x, 3)?;
        check_dimension(grad, 3)?;
        let (r, theta) = polar(x)?;
        let da = x[0] - 1.0;
        let dr = r - 1.0;
        let v = (da * da + dr * dr) / (2.0 * self.epsilon) + Self::free_energy(theta);
        let radial = dr / (self.epsilon * r);
        let angular = Self::free_energy_derivative(theta) / (r * r);
        grad[0] = da / self.epsilon;
        grad[1] = radial * x[1] - angular * x[2];
        grad[2] = radial * x[2] + angular * x[1];
        finite(v, "three-atom energy")
    }
}

/// The bond angle `θ = atan2(y_c, x_c)` with values in `(-π, π]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThetaCoordinate;

impl ReactionCoordinate for ThetaCoordinate {
    fn input_dimension(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, 3)?;
        polar(x).map(|(_, t)| t)
    }

    fn value_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dimension(x, 3)?;
        let (r, theta) = polar(x)?;
        let r2 = r * r;
        grad[0] = 0.0;
        grad[1] = -x[2] / r2;
        grad[2] = x[1] / r2;
        Ok(theta)
    }

    fn laplacian(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, 3)?;
        polar(x).map(|_| 0.0)
    }

    fn grad_norm_sq(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, 3)?;
        let (r, _) = polar(x)?;
        Ok(1.0 / (r * r))
    }

    fn image_contains(&self, z: f64) -> bool {
        z > -PI && z <= PI
    }
}
