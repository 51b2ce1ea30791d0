//! Chain drivers.

use super::{mala_step, mm_step_direct, mm_step_indirect, DirectReconstructor, ExtendedState, Gibbs, MalaState, MalaWorkspace, MmWorkspace, SamplerParams};
use crate::error::{Error, Result};
use crate::model::System;
use crate::rng::ChainStreams;
use crate::tables::MacroTables;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sampler {
    Mala,
    MmDirect,
    MmIndirect,
}

impl Sampler {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mala" => Ok(Self::Mala),
            "mm_direct" => Ok(Self::MmDirect),
            "mm_indirect" => Ok(Self::MmIndirect),
            other => Err(Error::InvalidParameter(format!("unknown sampler `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mala => "mala",
            Self::MmDirect => "mm_direct",
            Self::MmIndirect => "mm_indirect",
        }
    }

    pub fn uses_tables(self) -> bool {
        self != Self::Mala
    }
}

/// Acceptance bookkeeping of one chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChainCounters {
    pub steps: u64,
    pub macro_accepted: u64,
    pub micro_attempted: u64,
    pub micro_accepted: u64,
    /// Accepted moves of a plain MALA chain.
    pub mala_accepted: u64,
    pub biased_steps: u64,
    pub biased_accepted: u64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

impl ChainCounters {
    pub fn macro_acceptance(&self) -> f64 {
        ratio(self.macro_accepted, self.steps)
    }

    /// Accepted reconstructions over attempted ones.
    pub fn micro_acceptance(&self) -> f64 {
        ratio(self.micro_accepted, self.micro_attempted)
    }

    pub fn mala_acceptance(&self) -> f64 {
        ratio(self.mala_accepted, self.steps)
    }

    pub fn biased_acceptance(&self) -> f64 {
        ratio(self.biased_accepted, self.biased_steps)
    }

    pub fn merge(&mut self, o: &ChainCounters) {
        self.steps += o.steps;
        self.macro_accepted += o.macro_accepted;
        self.micro_attempted += o.micro_attempted;
        self.micro_accepted += o.micro_accepted;
        self.mala_accepted += o.mala_accepted;
        self.biased_steps += o.biased_steps;
        self.biased_accepted += o.biased_accepted;
    }
}

/// Runs `params.n` steps of chain `chain` from `x0`, calling `observe(x, z)`
/// once per emitted sample. `z` is the macroscopic coordinate of the extended
/// state, or NaN for plain MALA. Randomness comes from the substreams
/// `(params.seed, chain)`.
pub fn run_chain(
    system: &System,
    sampler: Sampler,
    tables: Option<&MacroTables>,
    params: &SamplerParams,
    x0: Vec<f64>,
    chain: u64,
    mut observe: impl FnMut(&[f64], f64),
) -> Result<ChainCounters> {
    params.validate()?;
    let model = system.potential();
    let rc = system.reaction_coordinate();
    let mut streams = ChainStreams::new(params.seed, chain);
    let mut c = ChainCounters::default();
    if sampler == Sampler::Mala {
        let target = Gibbs(model);
        let mut state = MalaState::new(&target, x0)?;
        let mut ws = MalaWorkspace::new(model.dimension());
        for _ in 0..params.n {
            if mala_step(&mut state, &target, params.delta_t_micro, params.beta, &mut streams.micro_stream, &mut ws) {
                c.mala_accepted += 1;
            }
            c.steps += 1;
            observe(&state.x, f64::NAN);
        }
        return Ok(c);
    }
    let tables = tables.ok_or_else(|| Error::InvalidParameter(format!("{} needs macroscopic tables", sampler.name())))?;
    if tables.beta != params.beta {
        return Err(Error::InvalidParameter(format!(
            "tables were built at beta={} but the chain runs at beta={}",
            tables.beta, params.beta
        )));
    }
    let mut state = ExtendedState::new(model, rc, x0)?;
    match sampler {
        Sampler::MmIndirect => {
            if tables.lambda != params.lambda {
                return Err(Error::InvalidParameter(format!(
                    "normalization constant was built for lambda={} but the chain uses lambda={}",
                    tables.lambda, params.lambda
                )));
            }
            let mut ws = MmWorkspace::new(model.dimension());
            for _ in 0..params.n {
                let o = mm_step_indirect(
                    &mut state,
                    tables,
                    params,
                    model,
                    rc,
                    &mut streams.macro_stream,
                    &mut streams.micro_stream,
                    &mut ws,
                )?;
                record(&mut c, o, params.k);
                observe(state.x(), state.z());
            }
        }
        Sampler::MmDirect => {
            let recon = DirectReconstructor::new(system, params.beta)?;
            for _ in 0..params.n {
                let o = mm_step_direct(
                    &mut state,
                    tables,
                    params,
                    model,
                    rc,
                    &recon,
                    &mut streams.macro_stream,
                    &mut streams.micro_stream,
                )?;
                record(&mut c, o, 0);
                observe(state.x(), state.z());
            }
        }
        Sampler::Mala => unreachable!(),
    }
    Ok(c)
}

fn record(c: &mut ChainCounters, o: super::StepOutcome, k: usize) {
    c.steps += 1;
    c.macro_accepted += o.macro_accepted as u64;
    c.micro_attempted += o.micro_attempted as u64;
    c.micro_accepted += o.micro_accepted as u64;
    if o.micro_attempted {
        c.biased_steps += k as u64;
        c.biased_accepted += o.biased_accepts as u64;
    }
}
