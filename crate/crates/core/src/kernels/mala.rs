//! Metropolis-adjusted Langevin moves.
//!
//! A target is written as `exp(-β U(x))`. The proposal is the Euler-Maruyama
//! step `y = x - δt ∇U(x) + sqrt(2δt/β) η` and is corrected by a
//! Metropolis-Hastings test with the Gaussian transition density of that step.

use crate::error::{Error, Result};
use crate::model::{PotentialModel, ReactionCoordinate};
use crate::rng::RandomStream;

/// A potential `U` with gradient, defining the target `exp(-β U)`.
pub trait Potential {
    fn dimension(&self) -> usize;

    /// Writes `∇U(x)` into `grad` and returns `U(x)`.
    fn potential_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// The unbiased Gibbs target `U = V`.
pub struct Gibbs<'a>(pub &'a dyn PotentialModel);

impl Potential for Gibbs<'_> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn potential_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.0.energy_gradient(x, grad)
    }
}

/// The biased target `U = V + (λ/2)(ξ - z)²` of the reconstruction step.
pub struct Biased<'a> {
    pub model: &'a dyn PotentialModel,
    pub rc: &'a dyn ReactionCoordinate,
    pub z: f64,
    pub lambda: f64,
}

impl Biased<'_> {
    /// `U` and `∇U` from cached `V`, `∇V`, `ξ` and `∇ξ`.
    pub fn combine(&self, v: f64, grad_v: &[f64], xi: f64, grad_xi: &[f64], out: &mut [f64]) -> f64 {
        let d = xi - self.z;
        for ((o, gv), gx) in out.iter_mut().zip(grad_v).zip(grad_xi) {
            *o = gv + self.lambda * d * gx;
        }
        v + 0.5 * self.lambda * d * d
    }
}

impl Potential for Biased<'_> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn potential_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let n = x.len();
        let mut buf = [0.0f64; 16];
        let mut heap;
        let gxi: &mut [f64] = if n <= buf.len() {
            &mut buf[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        let v = self.model.energy_gradient(x, grad)?;
        let xi = self.rc.value_gradient(x, gxi)?;
        let d = xi - self.z;
        for (g, gx) in grad.iter_mut().zip(gxi.iter()) {
            *g += self.lambda * d * gx;
        }
        Ok(v + 0.5 * self.lambda * d * d)
    }
}

/// A potential given by a closure returning `U` and writing `∇U`.
pub struct FnPotential<F> {
    pub dimension: usize,
    pub f: F,
}

impl<F> Potential for FnPotential<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<f64>,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn potential_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        (self.f)(x, grad)
    }
}

/// Unnormalized log density of the reconstruction target,
/// `-βV(x) - (βλ/2)(ξ(x) - z)²`.
pub fn biased_log_density(
    x: &[f64],
    z_target: f64,
    lambda: f64,
    beta: f64,
    model: &dyn PotentialModel,
    rc: &dyn ReactionCoordinate,
) -> Result<f64> {
    let v = model.energy(x)?;
    let d = rc.value(x)? - z_target;
    Ok(-beta * v - 0.5 * beta * lambda * d * d)
}

/// A MALA chain position with its potential and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct MalaState {
    pub x: Vec<f64>,
    pub u: f64,
    pub grad: Vec<f64>,
}

impl MalaState {
    pub fn new(potential: &dyn Potential, x: Vec<f64>) -> Result<Self> {
        let mut grad = vec![0.0; x.len()];
        let u = potential.potential_gradient(&x, &mut grad)?;
        if !u.is_finite() {
            return Err(Error::Domain("initial potential is not finite".into()));
        }
        Ok(Self { x, u, grad })
    }
}

/// Log Metropolis-Hastings ratio for a move `x -> y`, given the potential and
/// gradient at both points. Non-finite inputs give `-∞`.
#[allow(clippy::too_many_arguments)]
pub fn mala_log_acceptance(
    x: &[f64],
    u_x: f64,
    grad_x: &[f64],
    y: &[f64],
    u_y: f64,
    grad_y: &[f64],
    delta_t: f64,
    beta: f64,
) -> f64 {
    if !u_y.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut forward = 0.0;
    let mut backward = 0.0;
    for i in 0..x.len() {
        let f = y[i] - x[i] + delta_t * grad_x[i];
        let b = x[i] - y[i] + delta_t * grad_y[i];
        forward += f * f;
        backward += b * b;
    }
    let r = -beta * (u_y - u_x) - beta / (4.0 * delta_t) * (backward - forward);
    if r.is_nan() {
        f64::NEG_INFINITY
    } else {
        r
    }
}

/// Scratch buffers for [`mala_step`].
#[derive(Debug, Clone, Default)]
pub struct MalaWorkspace {
    y: Vec<f64>,
    grad_y: Vec<f64>,
}

impl MalaWorkspace {
    pub fn new(dimension: usize) -> Self {
        Self {
            y: vec![0.0; dimension],
            grad_y: vec![0.0; dimension],
        }
    }
}

/// One MALA move. The state is replaced on acceptance and left untouched
/// otherwise. A proposal outside the model's domain is rejected.
pub fn mala_step(
    state: &mut MalaState,
    potential: &dyn Potential,
    delta_t: f64,
    beta: f64,
    rng: &mut RandomStream,
    ws: &mut MalaWorkspace,
) -> bool {
    let d = state.x.len();
    ws.y.resize(d, 0.0);
    ws.grad_y.resize(d, 0.0);
    let scale = (2.0 * delta_t / beta).sqrt();
    for i in 0..d {
        ws.y[i] = state.x[i] - delta_t * state.grad[i] + scale * rng.normal();
    }
    let u_y = potential
        .potential_gradient(&ws.y, &mut ws.grad_y)
        .unwrap_or(f64::INFINITY);
    let log_a = mala_log_acceptance(
        &state.x, state.u, &state.grad, &ws.y, u_y, &ws.grad_y, delta_t, beta,
    );
    // The uniform is drawn even for sure acceptances so that the number of
    // draws per step is fixed.
    let u = rng.uniform();
    let accepted = log_a >= 0.0 || u.ln() < log_a;
    if accepted {
        std::mem::swap(&mut state.x, &mut ws.y);
        std::mem::swap(&mut state.grad, &mut ws.grad_y);
        state.u = u_y;
    }
    accepted
}
