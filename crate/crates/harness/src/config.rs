//! Flat `key = value` experiment configuration.
//!
//! Keys carry a section prefix (`model.`, `rc.`, `sampler.`, `grid.`,
//! `tables.`, `baseline.`, `run.`, `output.`). Numeric values may be
//! expressions in `epsilon`, `height`, `beta`, `lambda` and `pi`. Missing keys
//! take model-specific defaults.

use crate::expr;
use anyhow::{anyhow, bail, Context, Result};
use mm_mcmc::kernels::{Sampler, SamplerParams};
use mm_mcmc::model::{InitMode, System};
use mm_mcmc::tables::{FreeEnergyEstimator, Grid, PrecomputeSettings};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const KEYS: &[&str] = &[
    "model.name",
    "model.epsilon",
    "model.height",
    "rc.name",
    "sampler.name",
    "sampler.beta",
    "sampler.lambda",
    "sampler.K",
    "sampler.delta_t_micro",
    "sampler.delta_t_macro",
    "sampler.N",
    "grid.z_min",
    "grid.z_max",
    "grid.J",
    "grid.lambda",
    "grid.delta_t",
    "grid.N_per_node",
    "grid.M_per_node",
    "grid.burn_in",
    "grid.estimator",
    "grid.seed",
    "tables.source",
    "tables.path",
    "baseline.delta_t_micro",
    "run.n_runs",
    "run.seed",
    "run.workers",
    "run.init",
    "output.dir",
    "output.observables",
    "output.thin",
    "output.dump_chains",
    "output.histogram_bins",
    "output.keep_samples",
];

/// Raw configuration: key to unevaluated value.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            c.set(k.trim(), v.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown config key `{key}`");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("override `{kv}` is not key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn emit(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The configuration with every default written out.
    pub fn with_defaults(&self) -> Result<Self> {
        let model = self.get("model.name").unwrap_or("three_atom");
        let mut out = Self::default();
        for (k, v) in defaults(model)? {
            out.values.insert(k.to_string(), v.to_string());
        }
        for (k, v) in &self.values {
            out.values.insert(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        Resolved::from_config(&self.with_defaults()?)
    }
}

fn defaults(model: &str) -> Result<Vec<(&'static str, &'static str)>> {
    let common = [
        ("grid.burn_in", "0.2"),
        ("grid.estimator", "effective_dynamics"),
        ("grid.N_per_node", "10000"),
        ("grid.M_per_node", "100000"),
        ("run.n_runs", "1"),
        ("run.seed", "0"),
        ("run.workers", "1"),
        ("output.dir", "out"),
        ("output.thin", "100"),
        ("output.dump_chains", "true"),
        ("output.histogram_bins", "100"),
        ("output.keep_samples", "false"),
        ("tables.source", "precompute"),
    ];
    let specific: &[(&str, &str)] = match model {
        "three_atom" => &[
            ("model.name", "three_atom"),
            ("model.epsilon", "1e-5"),
            ("rc.name", "theta"),
            ("sampler.name", "mm_indirect"),
            ("sampler.beta", "1"),
            ("sampler.lambda", "1/epsilon"),
            ("sampler.K", "5"),
            ("sampler.delta_t_micro", "epsilon"),
            ("sampler.delta_t_macro", "0.01"),
            ("sampler.N", "1000000"),
            ("grid.z_min", "0"),
            ("grid.z_max", "pi"),
            ("grid.J", "200"),
            ("grid.lambda", "100/epsilon"),
            ("grid.delta_t", "epsilon/100"),
            ("baseline.delta_t_micro", "epsilon"),
            ("run.init", "right_well"),
            ("output.observables", "theta"),
        ],
        "alanine" => &[
            ("model.name", "alanine"),
            ("rc.name", "psi"),
            ("sampler.name", "mm_indirect"),
            ("sampler.beta", "1/100"),
            ("sampler.lambda", "2.5e6"),
            ("sampler.K", "8"),
            ("sampler.delta_t_micro", "0.5/lambda"),
            ("sampler.delta_t_macro", "0.001"),
            ("sampler.N", "1000000"),
            ("grid.z_min", "-pi"),
            ("grid.z_max", "pi"),
            ("grid.J", "200"),
            ("grid.lambda", "2.5e6"),
            ("grid.delta_t", "2e-7"),
            ("baseline.delta_t_micro", "1e-7"),
            ("run.init", "equilibrium"),
            ("output.observables", "psi,phi"),
        ],
        "double_well_1d" => &[
            ("model.name", "double_well_1d"),
            ("model.height", "2"),
            ("rc.name", "identity"),
            ("sampler.name", "mm_indirect"),
            ("sampler.beta", "1"),
            ("sampler.lambda", "400"),
            ("sampler.K", "10"),
            ("sampler.delta_t_micro", "0.25/lambda"),
            ("sampler.delta_t_macro", "0.05"),
            ("sampler.N", "1000000"),
            ("grid.z_min", "-3"),
            ("grid.z_max", "3"),
            ("grid.J", "601"),
            ("grid.lambda", "1e5"),
            ("grid.delta_t", "1e-5"),
            ("baseline.delta_t_micro", "0.05"),
            ("run.init", "right_well"),
            ("output.observables", "x"),
            ("tables.source", "analytic"),
        ],
        other => bail!("unknown model `{other}`"),
    };
    let mut v: Vec<(&str, &str)> = common.to_vec();
    v.extend_from_slice(specific);
    Ok(v)
}

/// Where a run gets its macroscopic tables.
#[derive(Debug, Clone, PartialEq)]
pub enum TablesSource {
    /// Monte Carlo precomputation, loaded from `tables.path` when given and present.
    Precompute,
    /// Closed-form free energy and drift, unit diffusion, `N_λ` by quadrature.
    Analytic,
}

#[derive(Debug, Clone)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub observables: Vec<String>,
    pub thin: usize,
    pub dump_chains: bool,
    pub histogram_bins: usize,
    /// Keep the full observable series of every run in memory.
    pub keep_samples: bool,
}

/// A fully evaluated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub system: System,
    pub sampler: Sampler,
    pub params: SamplerParams,
    pub precompute: PrecomputeSettings,
    pub tables_source: TablesSource,
    pub tables_path: Option<PathBuf>,
    pub baseline_delta_t: f64,
    pub n_runs: usize,
    pub workers: usize,
    pub init: InitMode,
    pub output: OutputSettings,
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("invalid boolean `{other}`"),
    }
}

impl Resolved {
    fn from_config(c: &ExperimentConfig) -> Result<Self> {
        let get = |k: &str| c.get(k).ok_or_else(|| anyhow!("missing config key `{k}`"));
        let mut vars: BTreeMap<String, f64> = BTreeMap::new();
        vars.insert("pi".into(), std::f64::consts::PI);
        let num = |k: &str, vars: &BTreeMap<String, f64>| -> Result<f64> {
            let v = get(k)?;
            expr::eval(v, vars).with_context(|| format!("evaluating `{k} = {v}`"))
        };
        let int = |k: &str, vars: &BTreeMap<String, f64>| -> Result<usize> {
            let v = num(k, vars)?;
            if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
                bail!("`{k}` must be a nonnegative integer, got {v}");
            }
            Ok(v as usize)
        };
        let model = get("model.name")?;
        let system = match model {
            "three_atom" => {
                let eps = num("model.epsilon", &vars)?;
                vars.insert("epsilon".into(), eps);
                System::three_atom(eps)?
            }
            "alanine" => System::alanine(),
            "double_well_1d" => {
                let h = num("model.height", &vars)?;
                vars.insert("height".into(), h);
                System::double_well(h)?
            }
            other => bail!("unknown model `{other}`"),
        };
        let rc = get("rc.name")?;
        if rc != system.rc_name() {
            bail!("model `{model}` supports reaction coordinate `{}`, not `{rc}`", system.rc_name());
        }
        let beta = num("sampler.beta", &vars)?;
        vars.insert("beta".into(), beta);
        let lambda = num("sampler.lambda", &vars)?;
        vars.insert("lambda".into(), lambda);
        let sampler = Sampler::parse(get("sampler.name")?)?;
        if sampler == Sampler::MmDirect && !system.supports_direct_reconstruction() {
            bail!("sampler mm_direct is not available for model `{model}`: no direct reconstruction");
        }
        let seed: u64 = get("run.seed")?.parse().context("run.seed must be an unsigned integer")?;
        let params = SamplerParams {
            beta,
            lambda,
            k: int("sampler.K", &vars)?,
            delta_t_micro: num("sampler.delta_t_micro", &vars)?,
            delta_t_macro: num("sampler.delta_t_macro", &vars)?,
            n: int("sampler.N", &vars)?,
            seed,
        };
        params.validate()?;
        let grid = Grid::new(num("grid.z_min", &vars)?, num("grid.z_max", &vars)?, int("grid.J", &vars)?)?;
        let mut precompute = PrecomputeSettings::new(grid, num("grid.lambda", &vars)?, beta);
        precompute.delta_t = num("grid.delta_t", &vars)?;
        precompute.n_per_node = int("grid.N_per_node", &vars)?;
        precompute.m_per_node = int("grid.M_per_node", &vars)?;
        precompute.burn_in = num("grid.burn_in", &vars)?;
        precompute.estimator = FreeEnergyEstimator::parse(get("grid.estimator")?)?;
        precompute.n_lambda_lambda = Some(lambda);
        precompute.seed = match c.get("grid.seed") {
            Some(s) => s.parse().context("grid.seed must be an unsigned integer")?,
            None => seed,
        };
        let tables_source = match get("tables.source")? {
            "precompute" => TablesSource::Precompute,
            "analytic" => TablesSource::Analytic,
            other => bail!("unknown tables.source `{other}`"),
        };
        let observables: Vec<String> = get("output.observables")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        for o in &observables {
            if system.observable_index(o).is_none() {
                bail!("model `{model}` has no observable `{o}`; available: {}", system.observable_names().join(", "));
            }
        }
        let workers = int("run.workers", &vars)?.max(1);
        Ok(Self {
            config: c.clone(),
            sampler,
            params,
            precompute,
            tables_source,
            tables_path: c.get("tables.path").filter(|p| !p.is_empty()).map(PathBuf::from),
            baseline_delta_t: num("baseline.delta_t_micro", &vars)?,
            n_runs: int("run.n_runs", &vars)?.max(1),
            workers,
            init: InitMode::parse(get("run.init")?)?,
            output: OutputSettings {
                dir: PathBuf::from(get("output.dir")?),
                observables,
                thin: int("output.thin", &vars)?.max(1),
                dump_chains: parse_bool(get("output.dump_chains")?)?,
                histogram_bins: int("output.histogram_bins", &vars)?.max(1),
                keep_samples: parse_bool(get("output.keep_samples")?)?,
            },
            system,
        })
    }
}
