//! The experiment pipelines behind each subcommand.

use std::path::{Path, PathBuf};

use serde::Serialize;

use scorepost::diagnostics::{
    batches_per_timestep, chain_summary, per_timestep_score_diff, posterior_predictive_raw,
    posterior_predictive_scores, ChainSummary, PredictiveCheckReport,
};
use scorepost::rng::{derive_named_seed, derive_seed, seeded};
use scorepost::scoring::GaussianKernel;
use scorepost::simulators::generate_observations_with_raw;
use scorepost::tuning::{estimate_bandwidth, estimate_w, WTuningReport};
use scorepost::{run_chain, ChainTrace, Dataset, ScoringRuleConfig, SimulationBatch, Simulator};

use crate::config::ExperimentConfig;
use crate::error::{CliError, StageExt};
use crate::output::{
    column_names, read_observations_csv, read_trace_csv, write_json, write_matrix_csv, write_trace_csv,
    DirLock,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    GenerateObservations,
    TuneW,
    TuneBandwidth,
    Sample,
    PredictiveCheck,
    Sweep,
}

/// Every random stream used by a run, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub data: u64,
    pub simulate: u64,
    pub tune_w: u64,
    pub tune_bandwidth: u64,
    pub chain: u64,
    pub predictive: u64,
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            data: derive_named_seed(master, "data"),
            simulate: derive_named_seed(master, "simulate"),
            tune_w: derive_named_seed(master, "tune-w"),
            tune_bandwidth: derive_named_seed(master, "tune-bandwidth"),
            chain: derive_named_seed(master, "chain"),
            predictive: derive_named_seed(master, "predictive"),
        }
    }
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: Command,
    version: &'static str,
    seeds: Seeds,
    artifacts: &'a [String],
}

/// Observations plus the clean subset and raw series, when known.
struct Observed {
    all: Dataset,
    clean: Dataset,
    raw_clean: Option<Vec<Vec<f64>>>,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    model: Box<dyn Simulator>,
    seeds: Seeds,
    out: PathBuf,
    artifacts: Vec<String>,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn observed(&self) -> Result<Observed, CliError> {
        let d = self.model.output_dim();
        if let Some(csv) = &self.cfg.data.csv {
            let rows = read_observations_csv(csv, self.cfg.data.csv_header, d)?;
            let all = Dataset::from_rows(rows).map_err(CliError::validation)?;
            return Ok(Observed {
                clean: all.clone(),
                all,
                raw_clean: None,
            });
        }
        let spec = self.cfg.contamination().expect("validated: theta_star present");
        let generated = generate_observations_with_raw(&spec, self.model.as_ref(), &mut seeded(self.seeds.data)).stage("data")?;
        let clean = generated.clean().stage("data")?;
        let raw_clean = generated.raw.as_ref().map(|r| r[..clean.len()].to_vec());
        Ok(Observed {
            all: generated.dataset,
            clean,
            raw_clean,
        })
    }

    fn tune_w(&self, data: &Dataset) -> Result<WTuningReport, CliError> {
        let t = &self.cfg.tuning;
        estimate_w(
            self.model.as_ref(),
            data,
            &self.cfg.scoring,
            &t.reference,
            t.n_pairs,
            t.m.unwrap_or(self.cfg.chain.m),
            &mut seeded(self.seeds.tune_w),
        )
        .stage("tune-w")
    }

    fn tune_bandwidth(&self) -> Result<f64, CliError> {
        let t = &self.cfg.tuning;
        estimate_bandwidth(
            self.model.as_ref(),
            t.m_gamma.unwrap_or(self.cfg.chain.m),
            t.m_theta_gamma,
            &mut seeded(self.seeds.tune_bandwidth),
        )
        .stage("tune-bandwidth")
    }

    /// The configured learning rate, or one tuned on `data` (and recorded).
    fn learning_rate(&mut self, data: &Dataset, label: &str) -> Result<f64, CliError> {
        if let Some(w) = self.cfg.chain.w {
            return Ok(w);
        }
        let report = self.tune_w(data)?;
        log::info!("tuned w = {} from {} pairs", report.w, report.n_pairs_used);
        let p = self.path(&format!("tune_w{label}.json"));
        write_json(&p, &report)?;
        if !(report.w.is_finite() && report.w > 0.0) {
            return Err(CliError::runtime("tune-w", format!("tuned learning rate {} is not positive", report.w)));
        }
        Ok(report.w)
    }

    fn sample(&mut self, data: &Dataset, m: usize, groups: usize, label: &str) -> Result<(ChainTrace, ChainSummary), CliError> {
        let w = self.learning_rate(data, label)?;
        let mut chain = self.cfg.chain_config(w, m, groups);
        chain.master_seed = self.seeds.chain;
        chain.validate().map_err(CliError::validation)?;
        let trace = run_chain(self.model.as_ref(), data, &chain).stage("sample")?;
        let summary = chain_summary(&trace).stage("diagnostics")?;
        let p = self.path(&format!("trace{label}.csv"));
        write_trace_csv(&p, &trace)?;
        let p = self.path(&format!("summary{label}.json"));
        write_json(&p, &summary)?;
        Ok((trace, summary))
    }

    fn kernel(&self) -> Result<GaussianKernel, CliError> {
        let gamma = match (self.cfg.predictive.gamma, self.cfg.scoring) {
            (Some(g), _) => g,
            (None, ScoringRuleConfig::Kernel { gamma }) => gamma,
            (None, _) => self.tune_bandwidth()?,
        };
        GaussianKernel::new(gamma).map_err(CliError::validation)
    }

    fn predictive(&mut self, trace: &ChainTrace, clean: &Dataset, name: &str, stream: u64) -> Result<PredictiveCheckReport, CliError> {
        let kernel = self.kernel()?;
        let mut rng = seeded(derive_seed(self.seeds.predictive, stream));
        let report = posterior_predictive_scores(trace, self.model.as_ref(), clean, kernel, self.cfg.predictive.n_draws, &mut rng)
            .stage("predictive-check")?;
        let p = self.path(name);
        write_json(&p, &report)?;
        Ok(report)
    }

    fn finish(self, command: Command) -> Result<(), CliError> {
        let mut artifacts = self.artifacts;
        artifacts.extend(["config.toml".to_string(), "run.json".to_string()]);
        std::fs::write(self.out.join("config.toml"), self.cfg.to_toml_string()).stage("output")?;
        write_json(
            &self.out.join("run.json"),
            &RunRecord {
                command,
                version: env!("CARGO_PKG_VERSION"),
                seeds: self.seeds,
                artifacts: &artifacts,
            },
        )
    }
}

/// Execute `command` for a validated config, writing artifacts under `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig, command: Command) -> Result<(), CliError> {
    cfg.validate()?;
    let _lock = DirLock::acquire(&cfg.output.dir)?;
    let mut run = Run {
        cfg,
        model: cfg.model(),
        seeds: Seeds::new(cfg.master_seed),
        out: cfg.output.dir.clone(),
        artifacts: vec![],
    };
    log::info!("{command:?} with model {} (master seed {})", run.model.name(), cfg.master_seed);
    match command {
        Command::Simulate => {
            let theta = cfg
                .data
                .theta_star
                .as_ref()
                .ok_or_else(|| CliError::validation("`data.theta_star` is required to simulate"))?;
            let batch = run
                .model
                .simulate(theta, cfg.chain.m, &mut seeded(run.seeds.simulate))
                .stage("simulate")?;
            let p = run.path("simulations.csv");
            write_batch(&p, &batch)?;
        }
        Command::GenerateObservations => {
            let obs = run.observed()?;
            let p = run.path("observations.csv");
            write_matrix_csv(&p, &column_names("y", obs.all.dim()), obs.all.iter().map(|o| o.0.clone()))?;
            if let Some(raw) = &obs.raw_clean {
                let len = raw.first().map_or(0, Vec::len);
                let p = run.path("raw_observations.csv");
                write_matrix_csv(&p, &column_names("x", len), raw.iter().cloned())?;
            }
            let p = run.path("observations.json");
            write_json(
                &p,
                &serde_json::json!({ "n": obs.all.len(), "n_clean": obs.clean.len(), "n_outliers": obs.all.len() - obs.clean.len() }),
            )?;
        }
        Command::TuneW => {
            let obs = run.observed()?;
            let report = run.tune_w(&obs.all)?;
            let p = run.path("tune_w.json");
            write_json(&p, &report)?;
        }
        Command::TuneBandwidth => {
            let gamma = run.tune_bandwidth()?;
            let p = run.path("tune_bandwidth.json");
            write_json(
                &p,
                &serde_json::json!({
                    "gamma": gamma,
                    "m_gamma": cfg.tuning.m_gamma.unwrap_or(cfg.chain.m),
                    "m_theta_gamma": cfg.tuning.m_theta_gamma,
                }),
            )?;
        }
        Command::Sample => {
            let obs = run.observed()?;
            let (trace, _) = run.sample(&obs.all, cfg.chain.m, cfg.chain.groups, "")?;
            if cfg.predictive.enabled {
                run.predictive(&trace, &obs.clean, "predictive_check.json", 0)?;
            }
        }
        Command::PredictiveCheck => predictive_check(&mut run)?,
        Command::Sweep => sweep(&mut run)?,
    }
    run.finish(command)
}

fn write_batch(path: &Path, batch: &SimulationBatch) -> Result<(), CliError> {
    write_matrix_csv(path, &column_names("y", batch.dim()), batch.rows().map(<[f64]>::to_vec))
}

fn predictive_check(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let p = run.model.theta_dim();
    let trace_path = cfg.predictive.trace.clone().unwrap_or_else(|| run.out.join("trace.csv"));
    let trace = read_trace_csv(&trace_path, p)?;
    let obs = run.observed()?;
    run.predictive(&trace, &obs.clean, "predictive_check.json", 0)?;
    let Some(other_path) = cfg.predictive.compare_trace.clone() else {
        return Ok(());
    };
    let other = read_trace_csv(&other_path, p)?;
    run.predictive(&other, &obs.clean, "predictive_check_compare.json", 1)?;
    let (Some((channels, steps)), Some(raw)) = (run.model.raw_shape(), obs.raw_clean.as_ref()) else {
        log::info!("model has no raw series; skipping per-timestep differences");
        return Ok(());
    };
    let kernel = run.kernel()?;
    let n = cfg.predictive.n_draws;
    let mut rng_a = seeded(derive_seed(run.seeds.predictive, 2));
    let mut rng_b = seeded(derive_seed(run.seeds.predictive, 3));
    let a = posterior_predictive_raw(&trace, run.model.as_ref(), n, &mut rng_a).stage("predictive-check")?;
    let b = posterior_predictive_raw(&other, run.model.as_ref(), n, &mut rng_b).stage("predictive-check")?;
    let a = batches_per_timestep(&a, channels, steps).stage("predictive-check")?;
    let b = batches_per_timestep(&b, channels, steps).stage("predictive-check")?;
    let clean = batches_per_timestep(raw, channels, steps)
        .and_then(|bs| bs.iter().map(Dataset::from_batch).collect::<scorepost::Result<Vec<_>>>())
        .stage("predictive-check")?;
    let diffs = per_timestep_score_diff(&a, &b, &clean, kernel).stage("predictive-check")?;
    let path = run.path("timestep_diff.csv");
    let mut w = csv::Writer::from_path(&path).stage("output")?;
    w.write_record(["timestep", "energy_diff", "kernel_diff"]).stage("output")?;
    for d in diffs {
        w.write_record([d.timestep.to_string(), format!("{:?}", d.energy_diff), format!("{:?}", d.kernel_diff)])
            .stage("output")?;
    }
    w.flush().stage("output")
}

fn sweep(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    if cfg.sweep.n.is_empty() && cfg.sweep.m.is_empty() {
        return Err(CliError::validation("`sweep`: set `n` or `m` to sweep over"));
    }
    let obs = run.observed()?;
    let header = ["n", "m", "groups", "acceptance_rate", "posterior_cov_trace", "n_samples"];
    if !cfg.sweep.n.is_empty() {
        let mut rows = Vec::new();
        for &n in &cfg.sweep.n {
            let data = obs.all.truncated(n).stage("sweep")?;
            let (_, s) = run.sample(&data, cfg.chain.m, cfg.chain.groups, &format!("_n{n}"))?;
            rows.push(sweep_row(n, cfg.chain.m, cfg.chain.groups, &s));
        }
        let p = run.path("n_sweep.csv");
        write_rows(&p, &header, &rows)?;
    }
    if !cfg.sweep.m.is_empty() {
        let mut rows = Vec::new();
        for &m in &cfg.sweep.m {
            let g = cfg.sweep_groups(m);
            let (_, s) = run.sample(&obs.all, m, g, &format!("_m{m}"))?;
            rows.push(sweep_row(obs.all.len(), m, g, &s));
        }
        let p = run.path("m_sweep.csv");
        write_rows(&p, &header, &rows)?;
    }
    Ok(())
}

fn sweep_row(n: usize, m: usize, g: usize, s: &ChainSummary) -> Vec<String> {
    vec![
        n.to_string(),
        m.to_string(),
        g.to_string(),
        format!("{:?}", s.acceptance_rate),
        format!("{:?}", s.posterior_cov_trace),
        s.n_samples.to_string(),
    ]
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).stage("output")?;
    w.write_record(header).stage("output")?;
    for r in rows {
        w.write_record(r).stage("output")?;
    }
    w.flush().stage("output")
}
