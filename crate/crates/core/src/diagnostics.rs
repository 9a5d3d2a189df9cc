//! Posterior predictive checks and chain summaries.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SimulationBatch};
use crate::error::{precondition, Error, Result};
use crate::mcmc::ChainTrace;
use crate::rng::SimRng;
use crate::scoring::{FittedScore, GaussianKernel, ScoringRuleConfig};
use crate::simulators::Simulator;

/// Default number of posterior draws pooled into a predictive batch.
pub const DEFAULT_PREDICTIVE_DRAWS: usize = 1000;

/// Scores of a pooled posterior predictive against held-out observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveCheckReport {
    /// Energy score (exponent 1) summed over the observations.
    pub energy: f64,
    /// Gaussian-kernel score summed over the observations.
    pub kernel: f64,
    pub kernel_gamma: f64,
    pub n_predictive_draws: usize,
    pub n_observations: usize,
}

/// Up to `n` retained samples, evenly spaced through the trace.
pub fn subsample(trace: &ChainTrace, n: usize) -> Result<Vec<&[f64]>> {
    let len = trace.samples.len();
    if len == 0 {
        return precondition("trace has no retained samples");
    }
    if n == 0 {
        return precondition("need at least one predictive draw");
    }
    if len <= n {
        return Ok(trace.samples.iter().map(Vec::as_slice).collect());
    }
    Ok((0..n).map(|i| trace.samples[i * len / n].as_slice()).collect())
}

/// One simulated output per selected posterior sample, pooled into a batch.
pub fn posterior_predictive_batch(
    trace: &ChainTrace,
    model: &dyn Simulator,
    n_draws: usize,
    rng: &mut SimRng,
) -> Result<SimulationBatch> {
    let thetas = subsample(trace, n_draws)?;
    let parts = thetas
        .iter()
        .map(|t| model.simulate(t, 1, rng))
        .collect::<Result<Vec<_>>>()?;
    SimulationBatch::concat(&parts)
}

/// One raw series per selected posterior sample.
pub fn posterior_predictive_raw(
    trace: &ChainTrace,
    model: &dyn Simulator,
    n_draws: usize,
    rng: &mut SimRng,
) -> Result<Vec<Vec<f64>>> {
    subsample(trace, n_draws)?
        .iter()
        .map(|t| model.simulate_raw(t, rng))
        .collect()
}

/// Energy and kernel scores of a predictive batch, summed over `data`.
pub fn predictive_scores(batch: &SimulationBatch, data: &Dataset, kernel: GaussianKernel) -> Result<(f64, f64)> {
    let energy = FittedScore::fit(batch, &ScoringRuleConfig::energy())?.total(data)?;
    let kern = FittedScore::fit(batch, &ScoringRuleConfig::Kernel { gamma: kernel.gamma })?.total(data)?;
    Ok((energy, kern))
}

/// Pool posterior predictive draws and score them against `clean_data`.
pub fn posterior_predictive_scores(
    trace: &ChainTrace,
    model: &dyn Simulator,
    clean_data: &Dataset,
    kernel: GaussianKernel,
    n_draws: usize,
    rng: &mut SimRng,
) -> Result<PredictiveCheckReport> {
    kernel.validate()?;
    let batch = posterior_predictive_batch(trace, model, n_draws, rng)?;
    let (energy, kern) = predictive_scores(&batch, clean_data, kernel)?;
    Ok(PredictiveCheckReport {
        energy,
        kernel: kern,
        kernel_gamma: kernel.gamma,
        n_predictive_draws: batch.len(),
        n_observations: clean_data.len(),
    })
}

/// Regroup channel-major raw series (`channels x steps` each) into one batch per time step.
pub fn batches_per_timestep(series: &[Vec<f64>], channels: usize, steps: usize) -> Result<Vec<SimulationBatch>> {
    if series.is_empty() {
        return precondition("no series to regroup");
    }
    if let Some(bad) = series.iter().find(|s| s.len() != channels * steps) {
        return Err(Error::DimensionMismatch {
            expected: channels * steps,
            found: bad.len(),
        });
    }
    (0..steps)
        .map(|t| {
            let data = series
                .iter()
                .flat_map(|s| (0..channels).map(move |k| s[k * steps + t]))
                .collect();
            SimulationBatch::from_flat(data, series.len(), channels)
        })
        .collect()
}

/// Score differences at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestepDiff {
    pub timestep: usize,
    pub energy_diff: f64,
    pub kernel_diff: f64,
}

/// `score(b) - score(a)` per time step; positive values favour `a`.
pub fn per_timestep_score_diff(
    predictive_a: &[SimulationBatch],
    predictive_b: &[SimulationBatch],
    clean_data: &[Dataset],
    kernel: GaussianKernel,
) -> Result<Vec<TimestepDiff>> {
    if predictive_a.len() != predictive_b.len() || predictive_a.len() != clean_data.len() {
        return Err(Error::DimensionMismatch {
            expected: clean_data.len(),
            found: if predictive_a.len() != clean_data.len() {
                predictive_a.len()
            } else {
                predictive_b.len()
            },
        });
    }
    predictive_a
        .iter()
        .zip(predictive_b)
        .zip(clean_data)
        .enumerate()
        .map(|(t, ((a, b), y))| {
            let (ea, ka) = predictive_scores(a, y, kernel)?;
            let (eb, kb) = predictive_scores(b, y, kernel)?;
            Ok(TimestepDiff {
                timestep: t,
                energy_diff: eb - ea,
                kernel_diff: kb - ka,
            })
        })
        .collect()
}

/// Acceptance and moment summary of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub acceptance_rate: f64,
    pub n_samples: usize,
    pub posterior_mean: Vec<f64>,
    pub posterior_sd: Vec<f64>,
    /// Trace of the sample covariance (denominator `n - 1`).
    pub posterior_cov_trace: f64,
}

pub fn chain_summary(trace: &ChainTrace) -> Result<ChainSummary> {
    let n = trace.samples.len();
    if n == 0 {
        return precondition("trace has no retained samples");
    }
    let p = trace.samples[0].len();
    let mut mean = vec![0.0; p];
    for s in &trace.samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let var: Vec<f64> = if n < 2 {
        log::warn!("single retained sample, reporting zero posterior variance");
        vec![0.0; p]
    } else {
        (0..p)
            .map(|k| trace.samples.iter().map(|s| (s[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1) as f64)
            .collect()
    };
    Ok(ChainSummary {
        acceptance_rate: trace.acceptance_rate(),
        n_samples: n,
        posterior_cov_trace: var.iter().sum(),
        posterior_sd: var.iter().map(|v| v.sqrt()).collect(),
        posterior_mean: mean,
    })
}
