//! Heuristics for the learning rate `w` and the Gaussian-kernel bandwidth.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SimulationBatch};
use crate::error::{precondition, Error, Result};
use crate::rng::SimRng;
use crate::scoring::{FittedScore, ScoringRuleConfig};
use crate::simulators::Simulator;

/// Default number of prior pairs for the learning-rate heuristic.
pub const DEFAULT_W_PAIRS: usize = 100;
/// Default number of prior draws for the bandwidth heuristic.
pub const DEFAULT_BANDWIDTH_DRAWS: usize = 1000;

/// A reference pseudo-likelihood: `weight * score` plays the role of a
/// negative log likelihood. Dawid-Sebastiani with weight 1/2 is the Gaussian
/// synthetic likelihood up to an additive constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceScore {
    pub scoring: ScoringRuleConfig,
    pub weight: f64,
}

impl ReferenceScore {
    /// Gaussian synthetic likelihood.
    pub fn synthetic_likelihood() -> Self {
        Self {
            scoring: ScoringRuleConfig::DawidSebastiani,
            weight: 0.5,
        }
    }

    /// Use `scoring` itself as the negative log likelihood.
    pub fn unit(scoring: ScoringRuleConfig) -> Self {
        Self { scoring, weight: 1.0 }
    }
}

impl Default for ReferenceScore {
    fn default() -> Self {
        Self::synthetic_likelihood()
    }
}

/// Outcome of the learning-rate heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WTuningReport {
    pub w: f64,
    /// Finite ratios entering the median, in pair order.
    pub per_pair_ratios: Vec<f64>,
    pub n_pairs_used: usize,
    pub n_pairs_dropped: usize,
}

/// Median, averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return precondition("median of an empty set");
    }
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        return Ok(hi);
    }
    let lo = v[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (lo + hi))
}

/// Median over the finite ratios; errors if none are finite.
pub fn median_ratio(ratios: &[f64]) -> Result<f64> {
    let finite: Vec<f64> = ratios.iter().cloned().filter(|r| r.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Tuning("no pair produced a finite ratio".into()));
    }
    median(&finite)
}

fn pair_totals(
    batch: &SimulationBatch,
    data: &Dataset,
    scoring: &ScoringRuleConfig,
    reference: &ReferenceScore,
) -> Result<(f64, f64)> {
    let target = FittedScore::fit(batch, scoring)?.total(data)?;
    let refs = FittedScore::fit(batch, &reference.scoring)?.total(data)?;
    Ok((target, reference.weight * refs))
}

/// Learning rate matching the target-score posterior's log Bayes factors to
/// those of a reference pseudo-likelihood, over pairs of prior draws.
///
/// One batch of `m` simulations per parameter is shared by the target and the
/// reference scores.
pub fn estimate_w(
    model: &dyn Simulator,
    data: &Dataset,
    scoring: &ScoringRuleConfig,
    reference: &ReferenceScore,
    n_pairs: usize,
    m: usize,
    rng: &mut SimRng,
) -> Result<WTuningReport> {
    if n_pairs == 0 {
        return precondition("need at least one parameter pair");
    }
    if m < 2 {
        return precondition("need at least 2 simulations per parameter");
    }
    scoring.validate()?;
    reference.scoring.validate()?;
    let mut ratios = Vec::with_capacity(n_pairs);
    let mut dropped = 0;
    for pair in 0..n_pairs {
        let theta = model.prior().sample(rng);
        let theta_alt = model.prior().sample(rng);
        let eval = |t: &[f64], rng: &mut SimRng| -> Result<(f64, f64)> {
            let batch = model.simulate(t, m, rng)?;
            pair_totals(&batch, data, scoring, reference)
        };
        let a = eval(&theta, rng);
        let b = eval(&theta_alt, rng);
        let ratio = match (a, b) {
            (Ok((s, r)), Ok((s_alt, r_alt))) => (r - r_alt) / (s - s_alt),
            (Err(e), _) | (_, Err(e)) => {
                log::debug!("pair {pair} dropped: {e}");
                f64::NAN
            }
        };
        if ratio.is_finite() {
            ratios.push(ratio);
        } else {
            dropped += 1;
        }
    }
    let w = median_ratio(&ratios)?;
    Ok(WTuningReport {
        w,
        n_pairs_used: ratios.len(),
        n_pairs_dropped: dropped,
        per_pair_ratios: ratios,
    })
}

/// Median of all pairwise Euclidean distances within a batch.
pub fn median_pairwise_distance(batch: &SimulationBatch) -> Result<f64> {
    let m = batch.len();
    if m < 2 {
        return precondition("need at least 2 simulations for pairwise distances");
    }
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for j in 0..m {
        let xj = batch.row(j);
        for k in (j + 1)..m {
            let sq: f64 = xj.iter().zip(batch.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            d.push(sq.sqrt());
        }
    }
    median(&d)
}

/// Kernel bandwidth: median over prior draws of the median pairwise distance
/// between `m_gamma` simulations.
pub fn estimate_bandwidth(
    model: &dyn Simulator,
    m_gamma: usize,
    m_theta_gamma: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    if m_gamma < 2 {
        return precondition("need at least 2 simulations per parameter");
    }
    if m_theta_gamma == 0 {
        return precondition("need at least one parameter draw");
    }
    let mut per_theta = Vec::with_capacity(m_theta_gamma);
    for _ in 0..m_theta_gamma {
        let theta = model.prior().sample(rng);
        let batch = model.simulate(&theta, m_gamma, rng)?;
        per_theta.push(median_pairwise_distance(&batch)?);
    }
    let gamma = median(&per_theta)?;
    if !(gamma > 0.0) {
        return Err(Error::DegenerateSimulatorOutput);
    }
    Ok(gamma)
}
