//! Tabulated macroscopic coefficients on a uniform reaction-coordinate grid.

mod build;
mod io;

pub use build::{
    build_tables, estimate_eff_coeffs, estimate_free_energy, estimate_n_lambda,
    free_energy_from_effective_dynamics, n_lambda_quadrature, tables_from_free_energy,
    BuildReport, FreeEnergyEstimator, NodeDiagnostics, NodeEstimate, PrecomputeSettings,
};
pub use io::{load_tables, read_tables, save_tables, write_tables};

use crate::error::{Error, Result};
use std::sync::atomic::{AtomicU64, Ordering};

/// Uniform grid `z_j = z_min + j (z_max - z_min)/(J - 1)`, `j = 0..J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    z_min: f64,
    z_max: f64,
    nodes: usize,
}

impl Grid {
    pub fn new(z_min: f64, z_max: f64, nodes: usize) -> Result<Self> {
        if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        if nodes < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 nodes, got {nodes}"
            )));
        }
        Ok(Self { z_min, z_max, nodes })
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.z_max - self.z_min) / (self.nodes - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.nodes {
            self.z_max
        } else {
            self.z_min + j as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(|j| self.node(j))
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_min && z <= self.z_max
    }
}

/// Piecewise-linear function through per-node values. Evaluation outside the
/// grid returns the nearest endpoint value and counts the event.
#[derive(Debug)]
pub struct TabulatedFunction1D {
    grid: Grid,
    values: Vec<f64>,
    out_of_range: AtomicU64,
}

impl Clone for TabulatedFunction1D {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.clone(),
            out_of_range: AtomicU64::new(self.out_of_range_count()),
        }
    }
}

impl PartialEq for TabulatedFunction1D {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl TabulatedFunction1D {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("table value at node {j} is not finite")));
        }
        Ok(Self {
            grid,
            values,
            out_of_range: AtomicU64::new(0),
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation, clamped at the grid ends.
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let g = &self.grid;
        let j_max = g.nodes - 1;
        if !(z >= g.z_min && z <= g.z_max) {
            self.out_of_range.fetch_add(1, Ordering::Relaxed);
            return if z > g.z_max { self.values[j_max] } else { self.values[0] };
        }
        let t = (z - g.z_min) / g.spacing();
        let nearest = (t.round() as usize).min(j_max);
        if g.node(nearest) == z {
            return self.values[nearest];
        }
        let j = (t.floor() as usize).min(j_max - 1);
        let frac = (z - g.node(j)) / g.spacing();
        self.values[j] + frac * (self.values[j + 1] - self.values[j])
    }

    pub fn out_of_range_count(&self) -> u64 {
        self.out_of_range.load(Ordering::Relaxed)
    }

    pub fn reset_out_of_range(&self) {
        self.out_of_range.store(0, Ordering::Relaxed);
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The four tables a micro-macro chain reads: free energy `Â`, drift `b̂`,
/// diffusion `σ̂` and the normalization constant `N̂_λ`. `N̂_λ` omits the
/// unknown constant ratio of partition functions, which cancels in every
/// acceptance ratio that uses it.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroTables {
    pub free_energy: TabulatedFunction1D,
    pub drift: TabulatedFunction1D,
    pub diffusion: TabulatedFunction1D,
    pub n_lambda: TabulatedFunction1D,
    pub lambda: f64,
    pub beta: f64,
}

impl MacroTables {
    pub fn new(
        free_energy: TabulatedFunction1D,
        drift: TabulatedFunction1D,
        diffusion: TabulatedFunction1D,
        n_lambda: TabulatedFunction1D,
        lambda: f64,
        beta: f64,
    ) -> Result<Self> {
        let grid = *free_energy.grid();
        for t in [&drift, &diffusion, &n_lambda] {
            if *t.grid() != grid {
                return Err(Error::InvalidParameter("tables use different grids".into()));
            }
        }
        if let Some(j) = diffusion.values().iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(format!("diffusion at node {j} is not positive")));
        }
        if let Some(j) = n_lambda.values().iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "normalization constant at node {j} is not positive"
            )));
        }
        if !(lambda > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParameter("lambda and beta must be positive".into()));
        }
        Ok(Self {
            free_energy,
            drift,
            diffusion,
            n_lambda,
            lambda,
            beta,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.free_energy.grid()
    }

    /// Replaces `N̂_λ` by its quadrature value for another `(λ, β)`. Used when a
    /// sampler runs with a bias strength or temperature other than the one
    /// the tables were built with.
    pub fn retarget(&self, lambda: f64, beta: f64) -> Result<Self> {
        if lambda == self.lambda && beta == self.beta {
            return Ok(self.clone());
        }
        let n_lambda = n_lambda_quadrature(&self.free_energy, lambda, beta)?;
        Self::new(
            self.free_energy.clone(),
            self.drift.clone(),
            self.diffusion.clone(),
            n_lambda,
            lambda,
            beta,
        )
    }

    /// Total clamped evaluations across the four tables.
    pub fn out_of_range_count(&self) -> u64 {
        [&self.free_energy, &self.drift, &self.diffusion, &self.n_lambda]
            .iter()
            .map(|t| t.out_of_range_count())
            .sum()
    }

    pub fn reset_out_of_range(&self) {
        for t in [&self.free_energy, &self.drift, &self.diffusion, &self.n_lambda] {
            t.reset_out_of_range();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> TabulatedFunction1D {
        let g = Grid::new(-1.0, 2.0, 7).unwrap();
        TabulatedFunction1D::from_fn(g, |z| z * z).unwrap()
    }

    #[test]
    fn exact_at_nodes() {
        let t = line();
        for j in 0..7 {
            let z = t.grid().node(j);
            assert_eq!(t.eval(z), z * z);
        }
        assert_eq!(t.out_of_range_count(), 0);
    }

    #[test]
    fn midpoint_is_mean() {
        let t = line();
        let g = *t.grid();
        for j in 0..6 {
            let mid = 0.5 * (g.node(j) + g.node(j + 1));
            let want = 0.5 * (t.values()[j] + t.values()[j + 1]);
            assert!((t.eval(mid) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn clamps_and_counts() {
        let t = line();
        assert_eq!(t.eval(-5.0), 1.0);
        assert_eq!(t.eval(9.0), 4.0);
        assert_eq!(t.eval(f64::NAN), 1.0);
        assert_eq!(t.out_of_range_count(), 3);
        let c = t.clone();
        assert_eq!(c.out_of_range_count(), 3);
        t.reset_out_of_range();
        assert_eq!(t.out_of_range_count(), 0);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 1.0, 5).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert_eq!(Grid::new(0.0, 3.0, 4).unwrap().node(3), 3.0);
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        assert!(TabulatedFunction1D::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(TabulatedFunction1D::new(g, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn macro_tables_reject_nonpositive_values() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let f = |v: f64| TabulatedFunction1D::new(g, vec![v; 3]).unwrap();
        assert!(MacroTables::new(f(0.0), f(0.0), f(1.0), f(1.0), 1.0, 1.0).is_ok());
        assert!(MacroTables::new(f(0.0), f(0.0), f(0.0), f(1.0), 1.0, 1.0).is_err());
        assert!(MacroTables::new(f(0.0), f(0.0), f(1.0), f(-1.0), 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn linear_data_is_reproduced(a in -5.0f64..5.0, b in -5.0f64..5.0, z in -1.0f64..2.0) {
            let g = Grid::new(-1.0, 2.0, 13).unwrap();
            let t = TabulatedFunction1D::from_fn(g, |s| a * s + b).unwrap();
            prop_assert!((t.eval(z) - (a * z + b)).abs() < 1e-12);
        }

        #[test]
        fn interpolant_is_bracketed(vals in proptest::collection::vec(-10.0f64..10.0, 5), z in 0.0f64..1.0) {
            let g = Grid::new(0.0, 1.0, 5).unwrap();
            let t = TabulatedFunction1D::new(g, vals.clone()).unwrap();
            let j = ((z / g.spacing()).floor() as usize).min(3);
            let (lo, hi) = (vals[j].min(vals[j + 1]), vals[j].max(vals[j + 1]));
            let v = t.eval(z);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
