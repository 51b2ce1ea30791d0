//! Alanine dipeptide in six internal coordinates, one per energy term.

use super::{check_dimension, finite, PotentialModel};
use crate::error::{Error, Result};
use std::f64::consts::PI;

const K_CC: f64 = 1.17e6;
const R_CC: f64 = 1.515;
const K_CN: f64 = 1.147e6;
const R_CN: f64 = 1.335;
const K_CCN: f64 = 2.68e5;
const THETA_CCN_DEG: f64 = 113.9;
const K_CNC: f64 = 1.84e5;
const THETA_CNC_DEG: f64 = 117.6;
const K_PHI: f64 = 3.98e4;
const K_PSI: f64 = 2.93e3;

/// Coordinates `(r_CC, r_CN, θ_CCN, θ_CNC, φ, ψ)`, angles in radians.
/// Torsions enter only through cosines and are never wrapped here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlanineModel {
    theta_ccn: f64,
    theta_cnc: f64,
}

impl Default for AlanineModel {
    fn default() -> Self {
        Self::new()
    }
}

impl AlanineModel {
    pub const PHI: usize = 4;
    pub const PSI: usize = 5;
    pub const K_PSI: f64 = K_PSI;
    pub const K_PHI: f64 = K_PHI;

    pub fn new() -> Self {
        Self {
            theta_ccn: THETA_CCN_DEG.to_radians(),
            theta_cnc: THETA_CNC_DEG.to_radians(),
        }
    }

    /// Minimum of every term.
    pub fn equilibrium(&self) -> [f64; 6] {
        [R_CC, R_CN, self.theta_ccn, self.theta_cnc, 0.0, 0.0]
    }

    /// Marginal free energy of `ψ`; the coordinates are independent, so it is
    /// the `ψ` term itself.
    pub fn psi_free_energy(&self, psi: f64) -> f64 {
        K_PSI * (1.0 + (psi + PI).cos())
    }

    pub fn psi_free_energy_derivative(&self, psi: f64) -> f64 {
        -K_PSI * (psi + PI).sin()
    }
}

impl PotentialModel for AlanineModel {
    fn dimension(&self) -> usize {
        6
    }

    fn energy(&self, q: &[f64]) -> Result<f64> {
        let mut g = [0.0; 6];
        self.energy_gradient(q, &mut g)
    }

    fn energy_gradient(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dimension(q, 6)?;
        check_dimension(grad, 6)?;
        if !(q[0] > 0.0 && q[1] > 0.0) {
            return Err(Error::Domain("bond lengths must be positive".into()));
        }
        let d = [
            q[0] - R_CC,
            q[1] - R_CN,
            q[2] - self.theta_ccn,
            q[3] - self.theta_cnc,
        ];
        let k = [K_CC, K_CN, K_CCN, K_CNC];
        let mut v = 0.0;
        for i in 0..4 {
            v += 0.5 * k[i] * d[i] * d[i];
            grad[i] = k[i] * d[i];
        }
        let (sp, cp) = (q[4] + PI).sin_cos();
        let (ss, cs) = (q[5] + PI).sin_cos();
        v += K_PHI * (1.0 + cp) + K_PSI * (1.0 + cs);
        grad[4] = -K_PHI * sp;
        grad[5] = -K_PSI * ss;
        finite(v, "alanine energy")
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{assert_gradient_close, fd_gradient};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_is_zero() {
        let m = AlanineModel::new();
        let q = [1.515, 1.335, 113.9f64.to_radians(), 117.6f64.to_radians(), 0.0, 0.0];
        assert!(m.energy(&q).unwrap().abs() < 1e-9);
    }

    #[test]
    fn psi_flip_costs_twice_the_stiffness() {
        let m = AlanineModel::new();
        let mut q = m.equilibrium();
        q[AlanineModel::PSI] = PI;
        assert!((m.energy(&q).unwrap() - 5860.0).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_bond_is_rejected() {
        let m = AlanineModel::new();
        let mut q = m.equilibrium();
        q[1] = 0.0;
        assert!(matches!(m.energy(&q), Err(Error::Domain(_))));
    }

    #[test]
    fn torsions_are_not_wrapped() {
        let m = AlanineModel::new();
        let mut a = m.equilibrium();
        a[AlanineModel::PSI] = 0.3;
        let mut b = a;
        b[AlanineModel::PSI] = 0.3 + 2.0 * PI;
        assert!((m.energy(&a).unwrap() - m.energy(&b).unwrap()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_finite_differences(
            r1 in 1.4f64..1.6, r2 in 1.2f64..1.4, a1 in 1.8f64..2.2, a2 in 1.9f64..2.3,
            phi in -4.0f64..4.0, psi in -4.0f64..4.0,
        ) {
            let m = AlanineModel::new();
            let q = [r1, r2, a1, a2, phi, psi];
            let mut g = [0.0; 6];
            m.energy_gradient(&q, &mut g).unwrap();
            let fd = fd_gradient(|y| m.energy(y).unwrap(), &q);
            assert_gradient_close(&g, &fd, 1e-5);
        }
    }
}
