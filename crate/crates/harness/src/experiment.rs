//! Precompute, sampling, comparison and sweep drivers.

use crate::config::{ExperimentConfig, Resolved, TablesSource};
use anyhow::{anyhow, bail, Context, Result};
use mm_mcmc::diagnostics::{
    efficiency_gain, replicate_mean_variance, series_stats, EfficiencyReport, Histogram, MethodSummary,
};
use mm_mcmc::kernels::{run_chain, ChainCounters, Sampler};
use mm_mcmc::model::System;
use mm_mcmc::rng::{Purpose, RandomStream};
use mm_mcmc::tables::{
    build_tables, estimate_n_lambda, load_tables, save_tables, tables_from_free_energy, BuildReport, MacroTables,
};
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

/// Per-run statistics of one observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableEstimate {
    pub mean: f64,
    pub variance: f64,
    pub k_corr: f64,
}

/// Residual `z - ξ(x)` statistics over the second half of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean, correlation-corrected.
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub counters: ChainCounters,
    /// Wall-clock seconds of the sampling loop.
    pub runtime: f64,
    /// One entry per configured observable.
    pub estimates: Vec<ObservableEstimate>,
    /// Fraction of samples in the left well, where the model has two wells.
    pub well_fraction: Option<f64>,
    pub residual: Option<ResidualStats>,
    /// Full observable series, when `output.keep_samples` is set.
    pub samples: Option<Vec<Vec<f64>>>,
}

/// Across-run aggregate of one observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableAggregate {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    /// Variance of the per-run mean estimates.
    pub var_of_means: f64,
    /// Variance of the per-run variance estimates.
    pub var_of_variances: f64,
    pub k_corr: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub method: String,
    pub config: ExperimentConfig,
    pub observables: Vec<String>,
    pub runs: Vec<RunResult>,
    pub aggregates: Vec<ObservableAggregate>,
    pub counters: ChainCounters,
    pub histograms: Vec<Histogram>,
    pub out_of_range: u64,
    pub precompute_seconds: f64,
}

impl RunReport {
    /// Mean wall-clock time of one run.
    pub fn mean_runtime(&self) -> f64 {
        self.runs.iter().map(|r| r.runtime).sum::<f64>() / self.runs.len() as f64
    }

    pub fn aggregate(&self, observable: &str) -> Option<&ObservableAggregate> {
        self.aggregates.iter().find(|a| a.name == observable)
    }

    pub fn mean_well_fraction(&self) -> Option<f64> {
        let f: Vec<f64> = self.runs.iter().filter_map(|r| r.well_fraction).collect();
        (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
    }

    /// Statistic rows `(observable, statistic, value)`, runtime excluded.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut rows = Vec::new();
        for a in &self.aggregates {
            for (s, v) in [
                ("mean", a.mean),
                ("variance", a.variance),
                ("var_of_means", a.var_of_means),
                ("var_of_variances", a.var_of_variances),
                ("k_corr", a.k_corr),
            ] {
                rows.push((a.name.clone(), s.to_string(), v));
            }
        }
        let c = &self.counters;
        let mut global = vec![("n_runs", self.runs.len() as f64), ("steps", c.steps as f64)];
        if self.method == "mala" {
            global.push(("mala_acceptance", c.mala_acceptance()));
        } else {
            global.push(("macro_acceptance", c.macro_acceptance()));
            global.push(("micro_acceptance", c.micro_acceptance()));
            global.push(("biased_acceptance", c.biased_acceptance()));
            global.push(("out_of_range", self.out_of_range as f64));
        }
        if let Some(f) = self.mean_well_fraction() {
            global.push(("well_fraction", f));
        }
        let res: Vec<ResidualStats> = self.runs.iter().filter_map(|r| r.residual).collect();
        if !res.is_empty() {
            let n = res.len() as f64;
            global.push(("residual_mean", res.iter().map(|r| r.mean).sum::<f64>() / n));
            global.push(("residual_variance", res.iter().map(|r| r.variance).sum::<f64>() / n));
            global.push(("residual_stderr", (res.iter().map(|r| r.stderr * r.stderr).sum::<f64>()).sqrt() / n));
        }
        for (s, v) in global {
            rows.push(("-".to_string(), s.to_string(), v));
        }
        rows
    }
}

/// In-process table cache keyed by the settings that determine the build.
#[derive(Default)]
pub struct TableCache {
    built: HashMap<String, MacroTables>,
}

fn table_key(r: &Resolved) -> String {
    let mut key = String::new();
    for k in [
        "model.name",
        "model.epsilon",
        "model.height",
        "sampler.beta",
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
        "run.seed",
        "tables.source",
        "tables.path",
    ] {
        key.push_str(k);
        key.push('=');
        key.push_str(r.config.get(k).unwrap_or(""));
        key.push(';');
    }
    key
}

fn analytic_tables(r: &Resolved) -> Result<MacroTables> {
    let s = &r.system;
    if s.analytic_free_energy(0.0).is_none() {
        bail!("model `{}` has no closed-form free energy", s.name());
    }
    Ok(tables_from_free_energy(
        r.precompute.grid,
        |z| s.analytic_free_energy(z).unwrap_or(f64::NAN),
        |z| s.analytic_drift(z).unwrap_or(f64::NAN),
        |_| 1.0,
        r.params.lambda,
        r.params.beta,
    )?)
}

fn precompute_report(r: &Resolved) -> Result<BuildReport> {
    build_tables(&r.system, &r.precompute).context("precomputing macroscopic tables")
}

impl TableCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tables for `r`, with `N̂_λ` matching the sampler's `λ`. Returns the
    /// tables and the seconds spent building them.
    pub fn tables(&mut self, r: &Resolved) -> Result<(MacroTables, f64)> {
        let start = Instant::now();
        let key = table_key(r);
        let base = match self.built.get(&key) {
            Some(t) => t.clone(),
            None => {
                let t = match r.tables_source {
                    TablesSource::Analytic => analytic_tables(r)?,
                    TablesSource::Precompute => match &r.tables_path {
                        Some(p) if p.exists() => {
                            load_tables(p).with_context(|| format!("loading tables from {}", p.display()))?
                        }
                        path => {
                            let t = precompute_report(r)?.tables;
                            if let Some(p) = path {
                                save_tables(&t, p)?;
                            }
                            t
                        }
                    },
                };
                self.built.insert(key, t.clone());
                t
            }
        };
        if base.beta != r.params.beta {
            bail!("tables were built at beta={} but the sampler uses beta={}", base.beta, r.params.beta);
        }
        let tables = if base.lambda == r.params.lambda {
            base
        } else if r.tables_source == TablesSource::Analytic {
            base.retarget(r.params.lambda, r.params.beta)?
        } else {
            let (n, _) = estimate_n_lambda(
                &base.free_energy,
                r.params.lambda,
                r.params.beta,
                r.precompute.m_per_node,
                r.precompute.seed,
            )?;
            MacroTables::new(
                base.free_energy.clone(),
                base.drift.clone(),
                base.diffusion.clone(),
                n,
                r.params.lambda,
                r.params.beta,
            )?
        };
        Ok((tables, start.elapsed().as_secs_f64()))
    }
}

/// Histogram range of an observable.
fn observable_range(r: &Resolved, name: &str) -> (f64, f64) {
    match name {
        "theta" => (0.0, PI),
        "psi" | "phi" => (-PI, PI),
        "x" => (r.precompute.grid.z_min(), r.precompute.grid.z_max()),
        _ => (0.0, 4.0),
    }
}

/// Reaction-coordinate value separating the two wells.
fn well_threshold(system: &System) -> Option<f64> {
    match system {
        System::ThreeAtom { .. } => Some(FRAC_PI_2),
        System::DoubleWell { .. } => Some(0.0),
        System::Alanine { .. } => None,
    }
}

struct RunOutput {
    result: RunResult,
    histograms: Vec<Histogram>,
}

fn run_one(r: &Resolved, tables: Option<&MacroTables>, run: usize) -> Result<RunOutput> {
    let system = &r.system;
    let rc = system.reaction_coordinate();
    let idx: Vec<usize> = r
        .output
        .observables
        .iter()
        .map(|o| system.observable_index(o).ok_or_else(|| anyhow!("unknown observable `{o}`")))
        .collect::<Result<_>>()?;
    let mut histograms: Vec<Histogram> = r
        .output
        .observables
        .iter()
        .map(|o| {
            let (lo, hi) = observable_range(r, o);
            Histogram::new(lo, hi, r.output.histogram_bins)
        })
        .collect::<mm_mcmc::Result<_>>()?;
    let n = r.params.n;
    let mut series: Vec<Vec<f64>> = idx.iter().map(|_| Vec::with_capacity(n)).collect();
    let threshold = well_threshold(system);
    let mut left = 0u64;
    let track_residual = r.sampler != Sampler::Mala;
    let mut residuals = Vec::with_capacity(if track_residual { n - n / 2 } else { 0 });
    let mut dump = if r.output.dump_chains {
        let path = r.output.dir.join(format!("chain_{run}.csv"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write!(w, "step,z")?;
        for i in 0..system.dimension() {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        Some(w)
    } else {
        None
    };
    let mut io_error: Option<std::io::Error> = None;
    let mut step = 0usize;
    let mut rng = RandomStream::substream(r.params.seed, run as u64, Purpose::Init);
    let x0 = system.initial_state(r.init, &mut rng);
    let start = Instant::now();
    let counters = run_chain(system, r.sampler, tables, &r.params, x0, run as u64, |x, z| {
        for ((s, h), &i) in series.iter_mut().zip(histograms.iter_mut()).zip(&idx) {
            let v = system.observable(i, x);
            s.push(v);
            h.add(v);
        }
        if threshold.is_some() || (track_residual && step >= n / 2) {
            let xi = rc.value(x).unwrap_or(f64::NAN);
            if let Some(t) = threshold {
                left += (xi < t) as u64;
            }
            if track_residual && step >= n / 2 {
                residuals.push(z - xi);
            }
        }
        if let Some(w) = dump.as_mut() {
            if step.is_multiple_of(r.output.thin) && io_error.is_none() {
                let mut line = format!("{step},{z}");
                for v in x {
                    line.push(',');
                    line.push_str(&v.to_string());
                }
                if let Err(e) = writeln!(w, "{line}") {
                    io_error = Some(e);
                }
            }
        }
        step += 1;
    })?;
    let runtime = start.elapsed().as_secs_f64();
    if let Some(e) = io_error {
        return Err(e).context("writing chain dump");
    }
    if let Some(mut w) = dump {
        w.flush()?;
    }
    let estimates = series
        .iter()
        .map(|s| {
            let st = series_stats(s)?;
            Ok(ObservableEstimate {
                mean: st.mean,
                variance: st.variance,
                k_corr: st.k_corr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let residual = if track_residual && residuals.len() >= 2 {
        let st = series_stats(&residuals)?;
        Some(ResidualStats {
            mean: st.mean,
            variance: st.variance,
            stderr: st.stderr(),
        })
    } else {
        None
    };
    Ok(RunOutput {
        result: RunResult {
            run,
            counters,
            runtime,
            estimates,
            well_fraction: threshold.map(|_| left as f64 / n as f64),
            residual,
            samples: r.output.keep_samples.then_some(series),
        },
        histograms,
    })
}

/// Runs `n_runs` chains and aggregates them. Writes nothing.
pub fn run_sample(r: &Resolved, cache: &mut TableCache) -> Result<RunReport> {
    let (tables, precompute_seconds) = if r.sampler.uses_tables() {
        let (t, s) = cache.tables(r)?;
        (Some(t), s)
    } else {
        (None, 0.0)
    };
    if let Some(t) = &tables {
        t.reset_out_of_range();
    }
    if r.output.dump_chains {
        std::fs::create_dir_all(&r.output.dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(r.workers).build()?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        (0..r.n_runs)
            .into_par_iter()
            .map(|run| run_one(r, tables.as_ref(), run))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut counters = ChainCounters::default();
    let mut histograms: Vec<Histogram> = Vec::new();
    let mut runs = Vec::with_capacity(outputs.len());
    for o in outputs {
        counters.merge(&o.result.counters);
        if histograms.is_empty() {
            histograms = o.histograms;
        } else {
            for (h, other) in histograms.iter_mut().zip(&o.histograms) {
                h.merge(other)?;
            }
        }
        runs.push(o.result);
    }
    let aggregates = r
        .output
        .observables
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let means: Vec<f64> = runs.iter().map(|x| x.estimates[i].mean).collect();
            let vars: Vec<f64> = runs.iter().map(|x| x.estimates[i].variance).collect();
            let (mean, var_of_means) = replicate_mean_variance(&means);
            let (variance, var_of_variances) = replicate_mean_variance(&vars);
            let k_corr = runs.iter().map(|x| x.estimates[i].k_corr).sum::<f64>() / runs.len() as f64;
            ObservableAggregate {
                name: name.clone(),
                mean,
                variance,
                var_of_means,
                var_of_variances,
                k_corr,
            }
        })
        .collect();
    Ok(RunReport {
        method: r.sampler.name().to_string(),
        config: r.config.clone(),
        observables: r.output.observables.clone(),
        runs,
        aggregates,
        counters,
        histograms,
        out_of_range: tables.as_ref().map_or(0, |t| t.out_of_range_count()),
        precompute_seconds,
    })
}

/// Writes `report.csv`, `runs.csv`, `timing.csv`, the histograms and the
/// config echo into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), report.config.emit())?;
    let mut w = BufWriter::new(File::create(dir.join("report.csv"))?);
    writeln!(w, "method,observable,statistic,value")?;
    for (o, s, v) in report.rows() {
        writeln!(w, "{},{o},{s},{v}", report.method)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("runs.csv"))?);
    writeln!(w, "run,observable,mean,variance,k_corr")?;
    for run in &report.runs {
        for (name, e) in report.observables.iter().zip(&run.estimates) {
            writeln!(w, "{},{name},{},{},{}", run.run, e.mean, e.variance, e.k_corr)?;
        }
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("acceptance.csv"))?);
    writeln!(w, "run,macro_acceptance,micro_acceptance,mala_acceptance,well_fraction,residual_mean,residual_variance")?;
    for run in &report.runs {
        let c = &run.counters;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            run.run,
            c.macro_acceptance(),
            c.micro_acceptance(),
            c.mala_acceptance(),
            opt(run.well_fraction),
            opt(run.residual.map(|r| r.mean)),
            opt(run.residual.map(|r| r.variance)),
        )?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("timing.csv"))?);
    writeln!(w, "run,seconds")?;
    writeln!(w, "precompute,{}", report.precompute_seconds)?;
    for run in &report.runs {
        writeln!(w, "{},{}", run.run, run.runtime)?;
    }
    w.flush()?;
    for (name, h) in report.observables.iter().zip(&report.histograms) {
        let mut w = BufWriter::new(File::create(dir.join(format!("histogram_{name}.csv")))?);
        h.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Builds tables for `r`, writes them to `tables.path` (or `tables.txt` in
/// the output directory) plus per-node diagnostics, and returns the report.
pub fn cmd_precompute(r: &Resolved) -> Result<BuildReport> {
    let report = match r.tables_source {
        TablesSource::Precompute => precompute_report(r)?,
        TablesSource::Analytic => BuildReport {
            tables: analytic_tables(r)?,
            nodes: Vec::new(),
        },
    };
    std::fs::create_dir_all(&r.output.dir)?;
    let path = r.tables_path.clone().unwrap_or_else(|| r.output.dir.join("tables.txt"));
    save_tables(&report.tables, &path)?;
    std::fs::write(r.output.dir.join("config.txt"), r.config.emit())?;
    let mut w = BufWriter::new(File::create(r.output.dir.join("nodes.csv"))?);
    writeln!(
        w,
        "z,drift,drift_stderr,diffusion,diffusion_stderr,n_lambda,n_lambda_stderr,acceptance,residual_mean"
    )?;
    for n in &report.nodes {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            n.z,
            n.drift.value,
            n.drift.stderr,
            n.diffusion.value,
            n.diffusion.stderr,
            n.n_lambda.value,
            n.n_lambda.stderr,
            n.acceptance,
            n.residual_mean
        )?;
    }
    w.flush()?;
    Ok(report)
}

/// One row of a gain table.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub observable: String,
    /// `mean` or `variance`: which estimator's replicate variance is compared.
    pub statistic: String,
    pub report: EfficiencyReport,
}

fn summary(r: &RunReport, variance: f64) -> MethodSummary {
    let mm = r.method != "mala";
    MethodSummary {
        method: r.method.clone(),
        variance,
        runtime: r.mean_runtime(),
        macro_acceptance: mm.then(|| r.counters.macro_acceptance()),
        micro_acceptance: mm.then(|| r.counters.micro_acceptance()),
    }
}

/// Gain of `mm` over the baseline `micro` for every shared observable, on
/// the replicate variance of the mean and of the variance estimators.
pub fn compare(micro: &RunReport, mm: &RunReport) -> Result<Vec<GainRow>> {
    let mut rows = Vec::new();
    for a in &micro.aggregates {
        let Some(b) = mm.aggregate(&a.name) else { continue };
        for (stat, va, vb) in [
            ("mean", a.var_of_means, b.var_of_means),
            ("variance", a.var_of_variances, b.var_of_variances),
        ] {
            let (sa, sb) = (summary(micro, va), summary(mm, vb));
            let gain = efficiency_gain(sa.variance, sb.variance, sa.runtime, sb.runtime).unwrap_or(f64::NAN);
            rows.push(GainRow {
                observable: a.name.clone(),
                statistic: stat.to_string(),
                report: EfficiencyReport { micro: sa, mm: sb, gain },
            });
        }
    }
    if rows.is_empty() {
        bail!("the two runs share no observables");
    }
    Ok(rows)
}

pub const GAIN_HEADER: &str = "observable,statistic,var_micro,var_mm,t_micro,t_mm,variance_gain,runtime_gain,gain";

fn gain_line(g: &GainRow) -> String {
    let e = &g.report;
    format!(
        "{},{},{},{},{},{},{},{},{}",
        g.observable,
        g.statistic,
        e.micro.variance,
        e.mm.variance,
        e.micro.runtime,
        e.mm.runtime,
        e.variance_gain(),
        e.runtime_gain(),
        e.gain
    )
}

pub fn write_gains(rows: &[GainRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{GAIN_HEADER}")?;
    for g in rows {
        writeln!(w, "{}", gain_line(g))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs both configurations and writes their reports under `out/a`,
/// `out/b` and the gain table to `out/gain.csv`.
pub fn cmd_compare(a: &ExperimentConfig, b: &ExperimentConfig, out: &Path) -> Result<Vec<GainRow>> {
    let mut cache = TableCache::new();
    let mut reports = Vec::new();
    for (cfg, sub) in [(a, "a"), (b, "b")] {
        let mut cfg = cfg.clone();
        cfg.set("output.dir", &out.join(sub).to_string_lossy())?;
        let r = cfg.resolve()?;
        let report = run_sample(&r, &mut cache)?;
        write_report(&report, &r.output.dir)?;
        reports.push(report);
    }
    let rows = compare(&reports[0], &reports[1])?;
    std::fs::create_dir_all(out)?;
    write_gains(&rows, &out.join("gain.csv"))?;
    Ok(rows)
}

/// Parameters accepted by [`cmd_sweep`].
pub fn sweep_key(parameter: &str) -> Result<&'static str> {
    Ok(match parameter {
        "lambda" => "sampler.lambda",
        "epsilon" => "model.epsilon",
        "K" => "sampler.K",
        "delta_t_macro" => "sampler.delta_t_macro",
        other => bail!("cannot sweep `{other}`; use lambda, epsilon, K or delta_t_macro"),
    })
}

/// The MALA baseline paired with a micro-macro configuration.
pub fn baseline_config(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let full = cfg.with_defaults()?;
    let mut b = full.clone();
    b.set("sampler.name", "mala")?;
    b.set("sampler.delta_t_micro", full.get("baseline.delta_t_micro").unwrap_or("epsilon"))?;
    Ok(b)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub report: RunReport,
    pub gains: Vec<GainRow>,
}

/// One micro-macro run per value against a MALA baseline. The baseline is
/// run once unless `epsilon` is swept. Writes per-value reports under
/// `out/<parameter>_<index>` and `out/sweep.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, parameter: &str, values: &[String], out: &Path) -> Result<Vec<SweepPoint>> {
    let key = sweep_key(parameter)?;
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let mut cache = TableCache::new();
    let mut baseline: Option<RunReport> = None;
    let mut points = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let mut c = cfg.clone();
        c.set(key, v)?;
        let dir = out.join(format!("{parameter}_{i}"));
        if baseline.is_none() || parameter == "epsilon" {
            let mut b = baseline_config(&c)?;
            b.set("output.dir", &dir.join("baseline").to_string_lossy())?;
            let rb = b.resolve()?;
            let report = run_sample(&rb, &mut cache)?;
            write_report(&report, &rb.output.dir)?;
            baseline = Some(report);
        }
        c.set("output.dir", &dir.to_string_lossy())?;
        let r = c.resolve()?;
        let report = run_sample(&r, &mut cache)?;
        write_report(&report, &dir)?;
        let base = baseline.as_ref().expect("baseline run above");
        let gains = compare(base, &report)?;
        write_gains(&gains, &dir.join("gain.csv"))?;
        points.push(SweepPoint {
            value: v.clone(),
            report,
            gains,
        });
    }
    std::fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join("sweep.csv"))?);
    writeln!(w, "parameter,value,{GAIN_HEADER}")?;
    for p in &points {
        for g in &p.gains {
            writeln!(w, "{parameter},{},{}", p.value, gain_line(g))?;
        }
    }
    w.flush()?;
    Ok(points)
}
