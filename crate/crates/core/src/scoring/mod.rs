//! Scoring rules and their sample-based estimators.
//!
//! Every estimator scores a [`SimulationBatch`] drawn from a model against an
//! observation. Lower is better. The quantities that depend only on the batch
//! (pairwise sums, moment estimates, copula fits) are computed once by
//! [`FittedScore::fit`] and reused across the observations of a dataset.

mod dawid_sebastiani;
mod energy;
mod kernel;
mod semibsl;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, SimulationBatch};
use crate::error::{invalid, Error, Result};

pub(crate) use dawid_sebastiani::cholesky_checked;
pub use dawid_sebastiani::{ds_score_estimate, GaussianFit};
pub use energy::{energy_pair_mean, energy_score_estimate};
pub use kernel::{gaussian_kernel, kernel_pair_mean, kernel_score_estimate};
pub use semibsl::{
    grc_correlation, kde_marginal, semibsl_score_estimate, silverman_bandwidth, KdeMarginal,
    SemiBslFit, CDF_CLAMP,
};

/// Gaussian kernel `k(x, y) = exp(-|x - y|^2 / (2 gamma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianKernel {
    pub gamma: f64,
}

impl GaussianKernel {
    pub fn new(gamma: f64) -> Result<Self> {
        let k = Self { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return invalid("gamma", format!("bandwidth must be positive and finite, got {}", self.gamma));
        }
        Ok(())
    }
}

/// How the semiBSL marginal KDE bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// `0.9 * min(sd, IQR / 1.34) * m^(-1/5)` per column.
    #[default]
    Silverman,
    Fixed(f64),
}

fn default_beta() -> f64 {
    1.0
}

/// Which scoring rule to estimate, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScoringRuleConfig {
    Energy {
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Kernel {
        gamma: f64,
    },
    DawidSebastiani,
    SemiBsl {
        #[serde(default)]
        bandwidth: BandwidthRule,
    },
}

impl Default for ScoringRuleConfig {
    fn default() -> Self {
        ScoringRuleConfig::Energy { beta: 1.0 }
    }
}

impl ScoringRuleConfig {
    pub fn energy() -> Self {
        Self::Energy { beta: 1.0 }
    }

    pub fn kernel(gamma: f64) -> Self {
        Self::Kernel { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Energy { beta } => {
                if !(beta > 0.0 && beta < 2.0) {
                    return invalid("scoring.beta", format!("energy exponent must lie in (0, 2), got {beta}"));
                }
            }
            Self::Kernel { gamma } => GaussianKernel { gamma }.validate()?,
            Self::DawidSebastiani => {}
            Self::SemiBsl { bandwidth } => {
                if let BandwidthRule::Fixed(h) = bandwidth {
                    if !(h.is_finite() && h > 0.0) {
                        return invalid("scoring.bandwidth", format!("fixed KDE bandwidth must be positive, got {h}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Energy { .. } => "energy",
            Self::Kernel { .. } => "kernel",
            Self::DawidSebastiani => "dawid-sebastiani",
            Self::SemiBsl { .. } => "semi-bsl",
        }
    }
}

/// A score estimator with all batch-only quantities precomputed.
#[derive(Debug, Clone)]
pub enum FittedScore<'a> {
    Energy {
        batch: &'a SimulationBatch,
        beta: f64,
        pair_mean: f64,
    },
    Kernel {
        batch: &'a SimulationBatch,
        kernel: GaussianKernel,
        pair_mean: f64,
    },
    DawidSebastiani(GaussianFit),
    SemiBsl(SemiBslFit),
}

impl<'a> FittedScore<'a> {
    pub fn fit(batch: &'a SimulationBatch, cfg: &ScoringRuleConfig) -> Result<Self> {
        Ok(match *cfg {
            ScoringRuleConfig::Energy { beta } => FittedScore::Energy {
                batch,
                beta,
                pair_mean: energy_pair_mean(batch, beta)?,
            },
            ScoringRuleConfig::Kernel { gamma } => {
                let kernel = GaussianKernel::new(gamma)?;
                FittedScore::Kernel {
                    batch,
                    kernel,
                    pair_mean: kernel_pair_mean(batch, kernel)?,
                }
            }
            ScoringRuleConfig::DawidSebastiani => FittedScore::DawidSebastiani(GaussianFit::fit(batch)?),
            ScoringRuleConfig::SemiBsl { bandwidth } => {
                FittedScore::SemiBsl(SemiBslFit::fit(batch, bandwidth)?)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FittedScore::Energy { batch, .. } | FittedScore::Kernel { batch, .. } => batch.dim(),
            FittedScore::DawidSebastiani(fit) => fit.dim(),
            FittedScore::SemiBsl(fit) => fit.dim(),
        }
    }

    /// Score a single observation.
    pub fn score(&self, y: &Observation) -> Result<f64> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.dim(),
            });
        }
        let y = y.values();
        Ok(match self {
            FittedScore::Energy { batch, beta, pair_mean } => {
                2.0 * energy::mean_distance_power(batch, y, *beta) - pair_mean
            }
            FittedScore::Kernel { batch, kernel, pair_mean } => {
                pair_mean - 2.0 * kernel::mean_kernel_to(batch, y, *kernel)
            }
            FittedScore::DawidSebastiani(fit) => fit.ds_score(y),
            FittedScore::SemiBsl(fit) => fit.score(y)?,
        })
    }

    /// Sum of scores over a dataset.
    pub fn total(&self, data: &Dataset) -> Result<f64> {
        data.iter().map(|y| self.score(y)).sum()
    }
}

/// Sum of the estimated score over every observation in `data`.
pub fn total_score(batch: &SimulationBatch, data: &Dataset, cfg: &ScoringRuleConfig) -> Result<f64> {
    if batch.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: batch.dim(),
        });
    }
    FittedScore::fit(batch, cfg)?.total(data)
}

pub(crate) fn check_dims(batch: &SimulationBatch, y: &[f64]) -> Result<()> {
    if batch.dim() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.dim(),
            found: y.len(),
        });
    }
    Ok(())
}

pub(crate) fn require_pairs(batch: &SimulationBatch) -> Result<()> {
    if batch.len() < 2 {
        return Err(Error::Precondition(format!(
            "pairwise estimator needs at least 2 simulations, got {}",
            batch.len()
        )));
    }
    Ok(())
}
