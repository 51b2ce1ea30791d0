//! One-dimensional double well `h(x² - 1)²`.

use super::{check_dimension, finite, PotentialModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWell {
    height: f64,
}

impl DoubleWell {
    pub fn new(height: f64) -> Result<Self> {
        if !height.is_finite() || height < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "barrier height must be nonnegative, got {height}"
            )));
        }
        Ok(Self { height })
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn value(&self, x: f64) -> f64 {
        let w = x * x - 1.0;
        self.height * w * w
    }

    pub fn derivative(&self, x: f64) -> f64 {
        4.0 * self.height * x * (x * x - 1.0)
    }
}

impl PotentialModel for DoubleWell {
    fn dimension(&self) -> usize {
        1
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, 1)?;
        finite(self.value(x[0]), "double-well energy")
    }

    fn energy_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dimension(x, 1)?;
        grad[0] = self.derivative(x[0]);
        finite(self.value(x[0]), "double-well energy")
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{assert_gradient_close, fd_gradient};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wells_and_barrier() {
        let m = DoubleWell::new(2.5).unwrap();
        assert_eq!(m.energy(&[1.0]).unwrap(), 0.0);
        assert_eq!(m.energy(&[-1.0]).unwrap(), 0.0);
        assert_eq!(m.energy(&[0.0]).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(x in -3.0f64..3.0, h in 0.1f64..5.0) {
            let m = DoubleWell::new(h).unwrap();
            let mut g = [0.0];
            m.energy_gradient(&[x], &mut g).unwrap();
            let fd = fd_gradient(|y| m.energy(y).unwrap(), &[x]);
            assert_gradient_close(&g, &fd, 1e-5);
        }
    }
}
