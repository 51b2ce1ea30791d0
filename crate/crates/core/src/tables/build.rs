//! Monte Carlo estimation of the macroscopic tables.

use super::{Grid, MacroTables, TabulatedFunction1D};
use crate::diagnostics::series_stats;
use crate::error::{Error, Result};
use crate::kernels::{mala_step, Biased, MalaState, MalaWorkspace};
use crate::model::System;
use crate::rng::{Purpose, RandomStream};
use rayon::prelude::*;
use std::f64::consts::PI;

/// How `Â` is obtained from the biased node chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeEnergyEstimator {
    /// Integrates the invariant density of the estimated effective dynamics,
    /// `βÂ(z) = -β ∫ b̂/σ̂² dz + ln σ̂²(z)`.
    EffectiveDynamics,
    /// Reweights each node chain to the Lebesgue measure with weights
    /// `exp(βV) ‖∇ξ‖`. Heavy-tailed when the tilt is narrow.
    Reweighting,
}

impl FreeEnergyEstimator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "effective_dynamics" => Ok(Self::EffectiveDynamics),
            "reweighting" => Ok(Self::Reweighting),
            other => Err(Error::InvalidParameter(format!(
                "unknown free-energy estimator `{other}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::EffectiveDynamics => "effective_dynamics",
            Self::Reweighting => "reweighting",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeSettings {
    pub grid: Grid,
    /// Bias strength of the node chains.
    pub lambda: f64,
    pub beta: f64,
    /// MALA step of the node chains.
    pub delta_t: f64,
    pub n_per_node: usize,
    /// Gaussian draws per node for `N̂_λ`.
    pub m_per_node: usize,
    /// Fraction of each node chain discarded before averaging.
    pub burn_in: f64,
    pub seed: u64,
    pub estimator: FreeEnergyEstimator,
    /// `λ` of the normalization-constant table. Defaults to `lambda`; a
    /// sampler usually runs with a weaker bias than the node chains.
    pub n_lambda_lambda: Option<f64>,
    pub parallel: bool,
}

impl PrecomputeSettings {
    pub fn new(grid: Grid, lambda: f64, beta: f64) -> Self {
        Self {
            grid,
            lambda,
            beta,
            delta_t: 1.0 / lambda,
            n_per_node: 10_000,
            m_per_node: 100_000,
            burn_in: 0.2,
            seed: 0,
            estimator: FreeEnergyEstimator::EffectiveDynamics,
            n_lambda_lambda: None,
            parallel: true,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("delta_t", self.delta_t),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_per_node == 0 || self.m_per_node == 0 {
            return Err(Error::InvalidParameter("per-node sample counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::InvalidParameter(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in
            )));
        }
        Ok(())
    }

    fn kept(&self) -> usize {
        let burn = (self.burn_in * self.n_per_node as f64).floor() as usize;
        (self.n_per_node - burn).max(1)
    }
}

/// A node value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEstimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDiagnostics {
    pub z: f64,
    pub drift: NodeEstimate,
    pub diffusion: NodeEstimate,
    /// Reweighting estimate of `βÂ` before the shift.
    pub log_weight_mean: f64,
    pub n_lambda: NodeEstimate,
    pub acceptance: f64,
    /// Mean of `ξ(x) - z` over the kept samples.
    pub residual_mean: f64,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub tables: MacroTables,
    pub nodes: Vec<NodeDiagnostics>,
}

struct NodeSample {
    drift: Vec<f64>,
    grad_norm_sq: Vec<f64>,
    log_weight: Vec<f64>,
    residual_sum: f64,
    acceptance: f64,
}

fn sample_node(system: &System, settings: &PrecomputeSettings, j: usize) -> Result<NodeSample> {
    let z = settings.grid.node(j);
    let model = system.potential();
    let rc = system.reaction_coordinate();
    let d = model.dimension();
    let biased = Biased {
        model,
        rc,
        z,
        lambda: settings.lambda,
    };
    let build_err = |reason: String| Error::Build { node: j, reason };
    let mut state = MalaState::new(&biased, system.node_start(z))
        .map_err(|e| build_err(format!("invalid start: {e}")))?;
    let mut rng = RandomStream::substream(settings.seed, j as u64, Purpose::Precompute);
    let mut ws = MalaWorkspace::new(d);
    let burn = settings.n_per_node - settings.kept();
    let kept = settings.kept();
    let mut out = NodeSample {
        drift: Vec::with_capacity(kept),
        grad_norm_sq: Vec::with_capacity(kept),
        log_weight: Vec::with_capacity(kept),
        residual_sum: 0.0,
        acceptance: 0.0,
    };
    let mut grad_v = vec![0.0; d];
    let mut grad_xi = vec![0.0; d];
    let mut accepted = 0usize;
    for step in 0..settings.n_per_node {
        if mala_step(&mut state, &biased, settings.delta_t, settings.beta, &mut rng, &mut ws) {
            accepted += 1;
        }
        if step < burn {
            continue;
        }
        let x = &state.x;
        let v = model.energy_gradient(x, &mut grad_v).map_err(|e| build_err(e.to_string()))?;
        let xi = rc.value_gradient(x, &mut grad_xi).map_err(|e| build_err(e.to_string()))?;
        let lap = rc.laplacian(x).map_err(|e| build_err(e.to_string()))?;
        let dot: f64 = grad_v.iter().zip(&grad_xi).map(|(a, b)| a * b).sum();
        let norm_sq: f64 = grad_xi.iter().map(|g| g * g).sum();
        let b = -dot + lap / settings.beta;
        let lw = settings.beta * v + 0.5 * norm_sq.ln();
        if !(b.is_finite() && norm_sq.is_finite() && lw.is_finite()) {
            return Err(build_err(format!("non-finite statistic at step {step}")));
        }
        out.drift.push(b);
        out.grad_norm_sq.push(norm_sq);
        out.log_weight.push(lw);
        out.residual_sum += xi - z;
    }
    out.acceptance = accepted as f64 / settings.n_per_node as f64;
    Ok(out)
}

fn sample_all(system: &System, settings: &PrecomputeSettings) -> Result<Vec<NodeSample>> {
    settings.validate()?;
    let run = |j| sample_node(system, settings, j);
    if settings.parallel {
        (0..settings.grid.len()).into_par_iter().map(run).collect()
    } else {
        (0..settings.grid.len()).map(run).collect()
    }
}

fn mean_stderr(series: &[f64]) -> NodeEstimate {
    if series.len() < 2 {
        return NodeEstimate {
            value: series.first().copied().unwrap_or(f64::NAN),
            stderr: f64::INFINITY,
        };
    }
    let s = series_stats(series).expect("series has at least two samples");
    NodeEstimate {
        value: s.mean,
        stderr: s.stderr(),
    }
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}

fn coefficient_tables(
    grid: Grid,
    samples: &[NodeSample],
) -> Result<(TabulatedFunction1D, TabulatedFunction1D, Vec<NodeEstimate>, Vec<NodeEstimate>)> {
    let drift: Vec<NodeEstimate> = samples.iter().map(|s| mean_stderr(&s.drift)).collect();
    let mut sigma = Vec::with_capacity(samples.len());
    for s in samples {
        let m = mean_stderr(&s.grad_norm_sq);
        let value = m.value.sqrt();
        sigma.push(NodeEstimate {
            value,
            stderr: m.stderr / (2.0 * value),
        });
    }
    Ok((
        TabulatedFunction1D::new(grid, drift.iter().map(|e| e.value).collect())?,
        TabulatedFunction1D::new(grid, sigma.iter().map(|e| e.value).collect())?,
        drift,
        sigma,
    ))
}

/// Drift `b̂` and diffusion `σ̂` tables from biased node chains.
pub fn estimate_eff_coeffs(
    system: &System,
    settings: &PrecomputeSettings,
) -> Result<(TabulatedFunction1D, TabulatedFunction1D)> {
    let samples = sample_all(system, settings)?;
    let (b, s, _, _) = coefficient_tables(settings.grid, &samples)?;
    Ok((b, s))
}

fn reweighted_free_energy(
    grid: Grid,
    beta: f64,
    samples: &[NodeSample],
) -> Result<TabulatedFunction1D> {
    let mut values = Vec::with_capacity(samples.len());
    for (j, s) in samples.iter().enumerate() {
        let l = log_mean_exp(&s.log_weight);
        if !l.is_finite() {
            return Err(Error::Build {
                node: j,
                reason: "all reweighting weights vanish".into(),
            });
        }
        values.push(l / beta);
    }
    shift_to_zero(grid, values)
}

fn shift_to_zero(grid: Grid, mut values: Vec<f64>) -> Result<TabulatedFunction1D> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    for v in &mut values {
        *v -= min;
    }
    TabulatedFunction1D::new(grid, values)
}

/// Reweighting estimate of `Â`, shifted so that its minimum is zero.
pub fn estimate_free_energy(system: &System, settings: &PrecomputeSettings) -> Result<TabulatedFunction1D> {
    let samples = sample_all(system, settings)?;
    reweighted_free_energy(settings.grid, settings.beta, &samples)
}

/// `Â` from the invariant density of the effective dynamics, shifted so that
/// its minimum is zero.
pub fn free_energy_from_effective_dynamics(
    drift: &TabulatedFunction1D,
    diffusion: &TabulatedFunction1D,
    beta: f64,
) -> Result<TabulatedFunction1D> {
    let grid = *drift.grid();
    let h = grid.spacing();
    let b = drift.values();
    let s = diffusion.values();
    let f: Vec<f64> = b.iter().zip(s).map(|(b, s)| b / (s * s)).collect();
    let mut integral = 0.0;
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        if j > 0 {
            integral += 0.5 * h * (f[j - 1] + f[j]);
        }
        values.push(-integral + (s[j] * s[j]).ln() / beta);
    }
    shift_to_zero(grid, values)
}

/// Monte Carlo `N̂_λ(z_j) = (λβ/2π)^{1/2} E[exp(-βÂ(X))]`, `X ~ N(z_j, 1/(λβ))`,
/// with `Â` interpolated and clamped outside the grid.
pub fn estimate_n_lambda(
    free_energy: &TabulatedFunction1D,
    lambda: f64,
    beta: f64,
    m_per_node: usize,
    seed: u64,
) -> Result<(TabulatedFunction1D, Vec<NodeEstimate>)> {
    if m_per_node == 0 {
        return Err(Error::InvalidParameter("M per node must be positive".into()));
    }
    let grid = *free_energy.grid();
    let prefactor = (lambda * beta / (2.0 * PI)).sqrt();
    let width = 1.0 / (lambda * beta).sqrt();
    let before = free_energy.out_of_range_count();
    let estimates: Vec<NodeEstimate> = (0..grid.len())
        .map(|j| {
            let z = grid.node(j);
            let mut rng = RandomStream::substream(seed, j as u64, Purpose::NormalizationConstant);
            // Weights relative to the node value keep the variance representable.
            let a0 = free_energy.eval(z);
            let scale = (-beta * a0).exp();
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..m_per_node {
                let w = (-beta * (free_energy.eval(z + width * rng.normal()) - a0)).exp();
                let d = w - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (w - mean);
            }
            let m = m_per_node as f64;
            let var = m2 / (m - 1.0).max(1.0);
            NodeEstimate {
                value: prefactor * scale * mean,
                stderr: prefactor * scale * (var / m).sqrt(),
            }
        })
        .collect();
    // Tail draws past the grid ends are expected here; keep the sampler's
    // out-of-range count meaningful.
    free_energy.out_of_range.store(before, std::sync::atomic::Ordering::Relaxed);
    if let Some(j) = estimates.iter().position(|e| !(e.value > 0.0)) {
        return Err(Error::Build {
            node: j,
            reason: "normalization constant underflowed".into(),
        });
    }
    let table = TabulatedFunction1D::new(grid, estimates.iter().map(|e| e.value).collect())?;
    Ok((table, estimates))
}

/// `N_λ` by trapezoid quadrature of the Gaussian convolution of
/// `exp(-βÂ)`, with `Â` interpolated and clamped as in the sampler.
pub fn n_lambda_quadrature(
    free_energy: &TabulatedFunction1D,
    lambda: f64,
    beta: f64,
) -> Result<TabulatedFunction1D> {
    if !(lambda > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter("lambda and beta must be positive".into()));
    }
    let grid = *free_energy.grid();
    let width = 1.0 / (lambda * beta).sqrt();
    let step = width.min(grid.spacing()) / 32.0;
    let half = (10.0 * width / step).ceil() as i64;
    let norm = step / (width * (2.0 * PI).sqrt());
    let before = free_energy.out_of_range_count();
    let values: Vec<f64> = grid
        .nodes()
        .map(|z| {
            let mut acc = 0.0;
            for k in -half..=half {
                let u = k as f64 * step;
                let w = if k.abs() == half { 0.5 } else { 1.0 };
                let g = (-0.5 * (u / width).powi(2)).exp();
                acc += w * g * (-beta * free_energy.eval(z + u)).exp();
            }
            acc * norm * (lambda * beta / (2.0 * PI)).sqrt()
        })
        .collect();
    free_energy.out_of_range.store(before, std::sync::atomic::Ordering::Relaxed);
    TabulatedFunction1D::new(grid, values)
}

/// Tables from known coefficient functions, with `N_λ` by quadrature.
pub fn tables_from_free_energy(
    grid: Grid,
    free_energy: impl Fn(f64) -> f64,
    drift: impl Fn(f64) -> f64,
    diffusion: impl Fn(f64) -> f64,
    lambda: f64,
    beta: f64,
) -> Result<MacroTables> {
    let values: Vec<f64> = grid.nodes().map(free_energy).collect();
    let a = shift_to_zero(grid, values)?;
    let n = n_lambda_quadrature(&a, lambda, beta)?;
    MacroTables::new(
        a,
        TabulatedFunction1D::from_fn(grid, drift)?,
        TabulatedFunction1D::from_fn(grid, diffusion)?,
        n,
        lambda,
        beta,
    )
}

/// Full precompute: node chains, coefficient tables, free energy and `N̂_λ`.
pub fn build_tables(system: &System, settings: &PrecomputeSettings) -> Result<BuildReport> {
    let samples = sample_all(system, settings)?;
    let grid = settings.grid;
    let (drift, diffusion, drift_est, sigma_est) = coefficient_tables(grid, &samples)?;
    let free_energy = match settings.estimator {
        FreeEnergyEstimator::EffectiveDynamics => {
            free_energy_from_effective_dynamics(&drift, &diffusion, settings.beta)?
        }
        FreeEnergyEstimator::Reweighting => reweighted_free_energy(grid, settings.beta, &samples)?,
    };
    let lambda_n = settings.n_lambda_lambda.unwrap_or(settings.lambda);
    let (n_lambda, n_est) =
        estimate_n_lambda(&free_energy, lambda_n, settings.beta, settings.m_per_node, settings.seed)?;
    let nodes = samples
        .iter()
        .enumerate()
        .map(|(j, s)| NodeDiagnostics {
            z: grid.node(j),
            drift: drift_est[j],
            diffusion: sigma_est[j],
            log_weight_mean: log_mean_exp(&s.log_weight),
            n_lambda: n_est[j],
            acceptance: s.acceptance,
            residual_mean: s.residual_sum / s.drift.len() as f64,
        })
        .collect();
    let tables = MacroTables::new(free_energy, drift, diffusion, n_lambda, lambda_n, settings.beta)?;
    Ok(BuildReport { tables, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dw_settings(seed: u64) -> PrecomputeSettings {
        let grid = Grid::new(-1.5, 1.5, 31).unwrap();
        let mut s = PrecomputeSettings::new(grid, 1e5, 1.0);
        s.n_per_node = 4000;
        s.m_per_node = 2000;
        s.seed = seed;
        s
    }

    #[test]
    fn identity_rc_recovers_potential() {
        let system = System::double_well(2.0).unwrap();
        let settings = dw_settings(3);
        let report = build_tables(&system, &settings).unwrap();
        let System::DoubleWell { model, .. } = &system else { unreachable!() };
        for (j, node) in report.nodes.iter().enumerate() {
            let z = node.z;
            let err = (node.drift.value + model.derivative(z)).abs();
            assert!(err < 4.0 * node.drift.stderr + 0.02, "node {j}: {node:?}");
            assert_eq!(node.diffusion.value, 1.0);
        }
        let a = &report.tables.free_energy;
        let offsets: Vec<f64> = a.grid().nodes().zip(a.values()).map(|(z, v)| v - model.value(z)).collect();
        let spread = offsets.iter().copied().fold(f64::MIN, f64::max)
            - offsets.iter().copied().fold(f64::MAX, f64::min);
        assert!(spread < 0.05, "A - V spread {spread}");
        assert_eq!(a.min_value(), 0.0);
    }

    #[test]
    fn build_is_deterministic() {
        let system = System::double_well(1.0).unwrap();
        let mut s = dw_settings(9);
        s.n_per_node = 500;
        let a = build_tables(&system, &s).unwrap().tables;
        s.parallel = false;
        let b = build_tables(&system, &s).unwrap().tables;
        assert_eq!(a, b);
    }

    #[test]
    fn reweighting_is_shift_normalized() {
        let system = System::double_well(1.0).unwrap();
        let mut s = dw_settings(1);
        s.n_per_node = 500;
        let a = estimate_free_energy(&system, &s).unwrap();
        assert_eq!(a.min_value(), 0.0);
    }

    #[test]
    fn constant_free_energy_gives_constant_n_lambda() {
        let grid = Grid::new(0.0, 1.0, 11).unwrap();
        let a = TabulatedFunction1D::new(grid, vec![0.7; 11]).unwrap();
        let (lambda, beta) = (50.0, 2.0);
        let want = (lambda * beta / (2.0 * PI)).sqrt() * (-beta * 0.7f64).exp();
        let (n, est) = estimate_n_lambda(&a, lambda, beta, 100, 4).unwrap();
        for (v, e) in n.values().iter().zip(&est) {
            assert!((v - want).abs() < 1e-12 * want);
            assert!(e.stderr < 1e-12 * want);
        }
        let q = n_lambda_quadrature(&a, lambda, beta).unwrap();
        for v in q.values() {
            assert!((v - want).abs() < 1e-6 * want);
        }
    }

    #[test]
    fn large_lambda_limit() {
        let grid = Grid::new(-1.0, 1.0, 41).unwrap();
        let a = TabulatedFunction1D::from_fn(grid, |z| z * z).unwrap();
        let (lambda, beta) = (1e7, 1.0);
        let pre = (lambda * beta / (2.0 * PI)).sqrt();
        let (n, _) = estimate_n_lambda(&a, lambda, beta, 1000, 2).unwrap();
        for (z, v) in grid.nodes().zip(n.values()) {
            let want = pre * (-beta * z * z).exp();
            assert!((v / want - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn quadrature_matches_gaussian_identity() {
        // Â(z) = z²/2 with β = 1 convolves to a Gaussian in closed form:
        // (λ/2π)^{1/2} ∫ exp(-s²/2) N(s; z, 1/λ) ds = (λ/2π)^{1/2} (1+1/λ)^{-1/2} exp(-z²/(2(1+1/λ))).
        let grid = Grid::new(-12.0, 12.0, 481).unwrap();
        let a = TabulatedFunction1D::from_fn(grid, |z| 0.5 * z * z).unwrap();
        let lambda = 4.0;
        let q = n_lambda_quadrature(&a, lambda, 1.0).unwrap();
        let c = 1.0 + 1.0 / lambda;
        for j in (200..=280).step_by(10) {
            let z = grid.node(j);
            let want = (lambda / (2.0 * PI)).sqrt() / c.sqrt() * (-z * z / (2.0 * c)).exp();
            // Linear interpolation of z²/2 with spacing 0.05 shifts it by ≤ h²/8.
            assert!((q.values()[j] / want - 1.0).abs() < 2e-3, "z={z}");
        }
    }

    #[test]
    fn settings_validation() {
        let system = System::double_well(1.0).unwrap();
        let mut s = dw_settings(0);
        s.n_per_node = 0;
        assert!(build_tables(&system, &s).is_err());
        let mut s = dw_settings(0);
        s.burn_in = 1.0;
        assert!(build_tables(&system, &s).is_err());
        assert!(FreeEnergyEstimator::parse("bogus").is_err());
    }
}
