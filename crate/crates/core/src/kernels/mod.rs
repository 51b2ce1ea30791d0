//! Markov transition kernels: MALA, effective-dynamics proposals and the
//! composite micro-macro steps.

mod chain;
mod direct;
mod mala;

pub use chain::{run_chain, ChainCounters, Sampler};
pub use direct::DirectReconstructor;
pub use mala::{
    biased_log_density, mala_log_acceptance, mala_step, Biased, FnPotential, Gibbs, MalaState,
    MalaWorkspace, Potential,
};

use crate::error::{Error, Result};
use crate::model::{PotentialModel, ReactionCoordinate};
use crate::rng::RandomStream;
use crate::tables::MacroTables;
use std::f64::consts::PI;

/// Numerical parameters of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerParams {
    pub beta: f64,
    /// Bias strength of the reconstruction.
    pub lambda: f64,
    /// Biased MALA steps per reconstruction.
    pub k: usize,
    pub delta_t_micro: f64,
    pub delta_t_macro: f64,
    /// Chain length.
    pub n: usize,
    pub seed: u64,
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("delta_t_micro", self.delta_t_micro),
            ("delta_t_macro", self.delta_t_macro),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        Ok(())
    }
}

/// A point `(x, z)` of the extended space with `V`, `∇V`, `ξ` and `∇ξ`
/// cached at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    x: Vec<f64>,
    z: f64,
    energy: f64,
    grad_v: Vec<f64>,
    xi: f64,
    grad_xi: Vec<f64>,
}

impl ExtendedState {
    /// Chain start with `z = ξ(x)`.
    pub fn new(model: &dyn PotentialModel, rc: &dyn ReactionCoordinate, x: Vec<f64>) -> Result<Self> {
        let mut s = Self {
            z: 0.0,
            energy: 0.0,
            grad_v: vec![0.0; x.len()],
            xi: 0.0,
            grad_xi: vec![0.0; x.len()],
            x,
        };
        s.refresh(model, rc)?;
        s.z = s.xi;
        Ok(s)
    }

    fn refresh(&mut self, model: &dyn PotentialModel, rc: &dyn ReactionCoordinate) -> Result<()> {
        self.energy = model.energy_gradient(&self.x, &mut self.grad_v)?;
        self.xi = rc.value_gradient(&self.x, &mut self.grad_xi)?;
        Ok(())
    }

    /// Replaces the state and recomputes the caches.
    pub fn replace(
        &mut self,
        model: &dyn PotentialModel,
        rc: &dyn ReactionCoordinate,
        x: &[f64],
        z: f64,
    ) -> Result<()> {
        self.x.copy_from_slice(x);
        self.z = z;
        self.refresh(model, rc)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Cached `V(x)`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Cached `ξ(x)`.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `z - ξ(x)`.
    pub fn residual(&self) -> f64 {
        self.z - self.xi
    }
}

/// What happened in one micro-macro step. A step always emits one sample;
/// on rejection it is the previous one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub macro_accepted: bool,
    pub micro_attempted: bool,
    pub micro_accepted: bool,
    /// Accepted biased MALA steps during the reconstruction.
    pub biased_accepts: usize,
}

/// `ln q0(z_next | z)`: Gaussian with mean `z + b̂(z)Δt` and variance
/// `2Δt σ̂(z)²/β`.
pub fn macro_log_q0(z_next: f64, z: f64, tables: &MacroTables, delta_t_macro: f64, beta: f64) -> Result<f64> {
    let sigma = tables.diffusion.eval(z);
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("diffusion {sigma} at z={z} is not positive")));
    }
    let mean = z + tables.drift.eval(z) * delta_t_macro;
    let var = 2.0 * delta_t_macro * sigma * sigma / beta;
    let d = z_next - mean;
    Ok(-0.5 * d * d / var - 0.5 * (2.0 * PI * var).ln())
}

/// Draw from the density of [`macro_log_q0`].
pub fn macro_propose(z: f64, tables: &MacroTables, delta_t_macro: f64, beta: f64, rng: &mut RandomStream) -> f64 {
    macro_propose_with(z, tables, delta_t_macro, beta, rng.normal())
}

fn macro_propose_with(z: f64, tables: &MacroTables, delta_t_macro: f64, beta: f64, eta: f64) -> f64 {
    let sigma = tables.diffusion.eval(z);
    z + tables.drift.eval(z) * delta_t_macro + (2.0 * delta_t_macro / beta).sqrt() * sigma * eta
}

/// Log of the macroscopic Metropolis-Hastings ratio
/// `μ̄0(z')q0(z|z') / (μ̄0(z)q0(z'|z))` from its four log terms.
pub fn log_alpha_cg(log_mu0_next: f64, log_mu0: f64, log_q_back: f64, log_q_forward: f64) -> Result<f64> {
    if log_mu0 == f64::NEG_INFINITY || log_mu0.is_nan() {
        return Err(Error::InvariantViolation("macroscopic density vanishes at the current state".into()));
    }
    let r = log_mu0_next + log_q_back - log_mu0 - log_q_forward;
    Ok(if r.is_nan() { f64::NEG_INFINITY } else { r.min(0.0) })
}

/// Macroscopic acceptance probability for `z -> z_next` with `μ̄0 = exp(-βÂ)`.
/// Proposals outside the image of the reaction coordinate are rejected.
pub fn alpha_cg(
    z_next: f64,
    z: f64,
    tables: &MacroTables,
    delta_t_macro: f64,
    beta: f64,
    rc: &dyn ReactionCoordinate,
) -> Result<f64> {
    log_macro_acceptance(z_next, z, tables, delta_t_macro, beta, rc).map(f64::exp)
}

fn log_macro_acceptance(
    z_next: f64,
    z: f64,
    tables: &MacroTables,
    delta_t_macro: f64,
    beta: f64,
    rc: &dyn ReactionCoordinate,
) -> Result<f64> {
    let log_mu0 = -beta * tables.free_energy.eval(z);
    if !rc.image_contains(z_next) {
        return log_alpha_cg(f64::NEG_INFINITY, log_mu0, 0.0, 0.0);
    }
    log_alpha_cg(
        -beta * tables.free_energy.eval(z_next),
        log_mu0,
        macro_log_q0(z, z_next, tables, delta_t_macro, beta)?,
        macro_log_q0(z_next, z, tables, delta_t_macro, beta)?,
    )
}

/// Log of the modified microscopic ratio
/// `[μ̄0(z)/μ̄0(z')] · [N̂_λ(z')/N̂_λ(z)]`, capped at zero.
pub fn log_alpha_f_indirect(log_mu0: f64, log_mu0_next: f64, n_lambda: f64, n_lambda_next: f64) -> Result<f64> {
    if !(n_lambda > 0.0 && n_lambda_next > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "normalization constants must be positive, got {n_lambda} and {n_lambda_next}"
        )));
    }
    let r = log_mu0 - log_mu0_next + n_lambda_next.ln() - n_lambda.ln();
    Ok(if r.is_nan() { f64::NEG_INFINITY } else { r.min(0.0) })
}

/// Microscopic acceptance probability of the indirect reconstruction. It
/// depends on `z` and `z_next` only.
pub fn alpha_f_indirect(z: f64, z_next: f64, tables: &MacroTables) -> Result<f64> {
    let beta = tables.beta;
    log_alpha_f_indirect(
        -beta * tables.free_energy.eval(z),
        -beta * tables.free_energy.eval(z_next),
        tables.n_lambda.eval(z),
        tables.n_lambda.eval(z_next),
    )
    .map(f64::exp)
}

/// Log of the direct-reconstruction microscopic ratio
/// `μ(x')μ̄0(ξ(x))ν̄(x|ξ(x)) / (μ(x)μ̄0(ξ(x'))ν̄(x'|ξ(x')))`, capped at zero.
pub fn log_alpha_f_direct(
    log_mu: f64,
    log_mu_next: f64,
    log_mu0: f64,
    log_mu0_next: f64,
    log_nu: f64,
    log_nu_next: f64,
) -> Result<f64> {
    if log_nu == f64::NEG_INFINITY || log_nu.is_nan() {
        return Err(Error::InvariantViolation(
            "reconstruction density vanishes at the current sample".into(),
        ));
    }
    let r = log_mu_next + log_mu0 + log_nu - log_mu - log_mu0_next - log_nu_next;
    Ok(if r.is_nan() { f64::NEG_INFINITY } else { r.min(0.0) })
}

/// Scratch space reused across micro-macro steps.
#[derive(Debug, Clone)]
pub struct MmWorkspace {
    mala: MalaWorkspace,
    biased: MalaState,
}

impl MmWorkspace {
    pub fn new(dimension: usize) -> Self {
        Self {
            mala: MalaWorkspace::new(dimension),
            biased: MalaState {
                x: vec![0.0; dimension],
                u: 0.0,
                grad: vec![0.0; dimension],
            },
        }
    }
}

fn reconstruct_from_state(
    state: &ExtendedState,
    z_target: f64,
    params: &SamplerParams,
    model: &dyn PotentialModel,
    rc: &dyn ReactionCoordinate,
    rng: &mut RandomStream,
    ws: &mut MmWorkspace,
) -> usize {
    let biased = Biased {
        model,
        rc,
        z: z_target,
        lambda: params.lambda,
    };
    ws.biased.x.copy_from_slice(&state.x);
    ws.biased.u = biased.combine(state.energy, &state.grad_v, state.xi, &state.grad_xi, &mut ws.biased.grad);
    let mut accepts = 0;
    for _ in 0..params.k {
        if mala_step(&mut ws.biased, &biased, params.delta_t_micro, params.beta, rng, &mut ws.mala) {
            accepts += 1;
        }
    }
    accepts
}

/// `K` biased MALA steps from `x_start` toward `z_target`. Returns the final
/// configuration and the fraction of accepted steps.
pub fn indirect_reconstruct(
    x_start: &[f64],
    z_target: f64,
    params: &SamplerParams,
    model: &dyn PotentialModel,
    rc: &dyn ReactionCoordinate,
    rng: &mut RandomStream,
) -> Result<(Vec<f64>, f64)> {
    params.validate()?;
    let state = ExtendedState::new(model, rc, x_start.to_vec())?;
    let mut ws = MmWorkspace::new(x_start.len());
    let accepts = reconstruct_from_state(&state, z_target, params, model, rc, rng, &mut ws);
    Ok((ws.biased.x, accepts as f64 / params.k as f64))
}

/// Draws of the macroscopic stream for one step. Every step consumes the same
/// three numbers whatever happens, so chains that differ only in microscopic
/// settings see identical macroscopic randomness.
struct MacroDraws {
    eta: f64,
    u_macro: f64,
    u_micro: f64,
}

impl MacroDraws {
    fn draw(rng: &mut RandomStream) -> Self {
        Self {
            eta: rng.normal(),
            u_macro: rng.uniform(),
            u_micro: rng.uniform(),
        }
    }
}

fn accept(u: f64, log_alpha: f64) -> bool {
    log_alpha >= 0.0 || u.ln() < log_alpha
}

/// One step of the micro-macro chain with indirect reconstruction.
#[allow(clippy::too_many_arguments)]
pub fn mm_step_indirect(
    state: &mut ExtendedState,
    tables: &MacroTables,
    params: &SamplerParams,
    model: &dyn PotentialModel,
    rc: &dyn ReactionCoordinate,
    macro_rng: &mut RandomStream,
    micro_rng: &mut RandomStream,
    ws: &mut MmWorkspace,
) -> Result<StepOutcome> {
    let draws = MacroDraws::draw(macro_rng);
    let beta = params.beta;
    let z = state.z;
    let z_next = macro_propose_with(z, tables, params.delta_t_macro, beta, draws.eta);
    let mut out = StepOutcome::default();
    let log_a = log_macro_acceptance(z_next, z, tables, params.delta_t_macro, beta, rc)?;
    if !accept(draws.u_macro, log_a) {
        return Ok(out);
    }
    out.macro_accepted = true;
    out.micro_attempted = true;
    out.biased_accepts = reconstruct_from_state(state, z_next, params, model, rc, micro_rng, ws);
    let log_f = log_alpha_f_indirect(
        -beta * tables.free_energy.eval(z),
        -beta * tables.free_energy.eval(z_next),
        tables.n_lambda.eval(z),
        tables.n_lambda.eval(z_next),
    )?;
    if accept(draws.u_micro, log_f) {
        out.micro_accepted = true;
        let x_new = std::mem::take(&mut ws.biased.x);
        let r = state.replace(model, rc, &x_new, z_next);
        ws.biased.x = x_new;
        r?;
    }
    Ok(out)
}

/// One step of the micro-macro chain with direct reconstruction. The state is
/// kept on the manifold, `z = ξ(x)`.
#[allow(clippy::too_many_arguments)]
pub fn mm_step_direct(
    state: &mut ExtendedState,
    tables: &MacroTables,
    params: &SamplerParams,
    model: &dyn PotentialModel,
    rc: &dyn ReactionCoordinate,
    reconstructor: &DirectReconstructor,
    macro_rng: &mut RandomStream,
    micro_rng: &mut RandomStream,
) -> Result<StepOutcome> {
    let draws = MacroDraws::draw(macro_rng);
    let beta = params.beta;
    let z = state.xi;
    let z_next = macro_propose_with(z, tables, params.delta_t_macro, beta, draws.eta);
    let mut out = StepOutcome::default();
    let log_a = log_macro_acceptance(z_next, z, tables, params.delta_t_macro, beta, rc)?;
    if !accept(draws.u_macro, log_a) {
        return Ok(out);
    }
    out.macro_accepted = true;
    out.micro_attempted = true;
    let x_new = reconstructor.sample(z_next, micro_rng)?;
    let log_mu_next = match model.energy(&x_new) {
        Ok(v) => -beta * v,
        Err(_) => f64::NEG_INFINITY,
    };
    let log_f = log_alpha_f_direct(
        -beta * state.energy,
        log_mu_next,
        -beta * tables.free_energy.eval(z),
        -beta * tables.free_energy.eval(z_next),
        reconstructor.log_density(&state.x)?,
        reconstructor.log_density(&x_new)?,
    )?;
    if accept(draws.u_micro, log_f) {
        out.micro_accepted = true;
        state.replace(model, rc, &x_new, z_next)?;
        state.z = state.xi;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
