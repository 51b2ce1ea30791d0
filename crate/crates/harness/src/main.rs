use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mm_mcmc_harness::{cmd_compare, cmd_precompute, cmd_sweep, run_sample, write_report, ExperimentConfig, TableCache};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mm-mcmc", version, about = "Micro-macro MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Overrides a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of concurrent runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build macroscopic tables and write them to disk.
    Precompute {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run replicated chains and write reports.
    Sample {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a baseline and a second configuration and report the gain.
    Compare {
        /// Baseline config first, then the compared config.
        #[arg(long, num_args = 1, required = true)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one configuration per parameter value against a MALA baseline.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// lambda, epsilon, K or delta_t_macro.
        #[arg(long)]
        param: String,
        /// Comma-separated values; expressions allowed.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(path: Option<&PathBuf>, common: &Common) -> Result<ExperimentConfig> {
    let mut c = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        c.apply_override(kv)?;
    }
    if let Some(o) = &common.out {
        c.set("output.dir", &o.to_string_lossy())?;
    }
    if let Some(w) = common.workers {
        c.set("run.workers", &w.to_string())?;
    }
    if let Some(s) = common.seed {
        c.set("run.seed", &s.to_string())?;
    }
    Ok(c)
}

fn out_dir(c: &ExperimentConfig) -> Result<PathBuf> {
    Ok(c.resolve()?.output.dir)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Precompute { config, common } => {
            let r = load(config.as_ref(), &common)?.resolve()?;
            let report = cmd_precompute(&r)?;
            let worst = |f: fn(&mm_mcmc::tables::NodeDiagnostics) -> f64| {
                report.nodes.iter().map(f).fold(0.0, f64::max)
            };
            println!("nodes: {}", report.tables.grid().len());
            if !report.nodes.is_empty() {
                println!("max drift stderr: {}", worst(|n| n.drift.stderr));
                println!("max diffusion stderr: {}", worst(|n| n.diffusion.stderr));
                println!("max N_lambda relative stderr: {}", worst(|n| n.n_lambda.stderr / n.n_lambda.value));
            }
            if let Some(err) = analytic_error(&r, &report.tables) {
                println!("max |A - A_exact| after shift: {err}");
            }
        }
        Command::Sample { config, common } => {
            let r = load(config.as_ref(), &common)?.resolve()?;
            let report = run_sample(&r, &mut TableCache::new())?;
            write_report(&report, &r.output.dir)?;
            for (o, s, v) in report.rows() {
                println!("{o} {s} {v}");
            }
            println!("mean runtime per run: {} s", report.mean_runtime());
        }
        Command::Compare { config, common } => {
            if config.len() != 2 {
                anyhow::bail!("compare needs exactly two --config files, baseline first");
            }
            let a = load(Some(&config[0]), &common)?;
            let b = load(Some(&config[1]), &common)?;
            let out = common.out.clone().map_or_else(|| out_dir(&b), Ok)?;
            for g in cmd_compare(&a, &b, &out)? {
                println!(
                    "{} {}: variance gain {} runtime gain {} gain {}",
                    g.observable,
                    g.statistic,
                    g.report.variance_gain(),
                    g.report.runtime_gain(),
                    g.report.gain
                );
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            common,
        } => {
            let c = load(config.as_ref(), &common)?;
            let out = out_dir(&c)?;
            for p in cmd_sweep(&c, &param, &values, &out)? {
                for g in &p.gains {
                    println!("{param}={} {} {}: gain {}", p.value, g.observable, g.statistic, g.report.gain);
                }
            }
        }
    }
    Ok(())
}

fn analytic_error(r: &mm_mcmc_harness::Resolved, t: &mm_mcmc::tables::MacroTables) -> Option<f64> {
    let exact: Vec<f64> = t
        .grid()
        .nodes()
        .map(|z| r.system.analytic_free_energy(z))
        .collect::<Option<_>>()?;
    let min = exact.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(
        t.free_energy
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, e)| (a - (e - min)).abs())
            .fold(0.0, f64::max),
    )
}
