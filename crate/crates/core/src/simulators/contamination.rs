use rand::Rng;
use rand_distr::{Cauchy, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SimulationBatch};
use crate::error::{invalid, precondition, Result};
use crate::rng::SimRng;

use super::Simulator;

/// Where the replaced observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutlierSource {
    /// `N(z, 1)` draws; only for one-dimensional models.
    NormalLocation { z: f64 },
    /// Model simulations at a different parameter.
    Parameters { theta: Vec<f64> },
    /// Standard Cauchy draws, independent per component.
    Cauchy,
}

/// A dataset of `n` observations, the last `floor(epsilon * n)` of which are outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub theta_star: Vec<f64>,
    pub outlier_source: OutlierSource,
    pub epsilon: f64,
    pub n: usize,
}

impl ContaminationSpec {
    pub fn clean(theta_star: Vec<f64>, n: usize) -> Self {
        Self {
            theta_star,
            outlier_source: OutlierSource::Cauchy,
            epsilon: 0.0,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("data.n", "need at least one observation");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return invalid("data.epsilon", format!("outlier proportion must lie in [0, 1], got {}", self.epsilon));
        }
        Ok(())
    }

    /// Deterministic outlier count `floor(epsilon * n)`.
    pub fn n_outliers(&self) -> usize {
        // the small guard keeps e.g. 0.29 * 100 from flooring to 28
        ((self.epsilon * self.n as f64) + 1e-9).floor() as usize
    }
}

/// Generated observations, with the raw series behind them when the model has one.
#[derive(Debug, Clone)]
pub struct GeneratedObservations {
    pub dataset: Dataset,
    /// One raw series per observation, if the model exposes raw series.
    pub raw: Option<Vec<Vec<f64>>>,
    pub n_outliers: usize,
}

impl GeneratedObservations {
    /// The observations drawn at the true parameter.
    pub fn clean(&self) -> Result<Dataset> {
        self.dataset.truncated(self.dataset.len() - self.n_outliers)
    }
}

fn draw_rows(model: &dyn Simulator, theta: &[f64], k: usize, with_raw: bool, rng: &mut SimRng) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if k == 0 {
        return Ok((vec![], vec![]));
    }
    if with_raw {
        let mut rows = Vec::with_capacity(k);
        let mut raws = Vec::with_capacity(k);
        for _ in 0..k {
            model.check_theta(theta)?;
            let raw = model.simulate_raw(theta, rng)?;
            rows.push(model.summarize(&raw)?);
            raws.push(raw);
        }
        Ok((rows, raws))
    } else {
        let b: SimulationBatch = model.simulate(theta, k, rng)?;
        Ok((b.rows().map(<[f64]>::to_vec).collect(), vec![]))
    }
}

/// Generate observations as described by `spec`, keeping raw series when available.
pub fn generate_observations_with_raw(
    spec: &ContaminationSpec,
    model: &dyn Simulator,
    rng: &mut SimRng,
) -> Result<GeneratedObservations> {
    spec.validate()?;
    let k = spec.n_outliers();
    let with_raw = model.raw_shape().is_some();
    let (mut rows, mut raws) = draw_rows(model, &spec.theta_star, spec.n - k, with_raw, rng)?;
    let d = model.output_dim();
    let mut raw_ok = with_raw;
    match &spec.outlier_source {
        OutlierSource::NormalLocation { z } => {
            if d != 1 && k > 0 {
                return precondition("normal-location outliers need a one-dimensional model");
            }
            for _ in 0..k {
                rows.push(vec![z + rng.sample::<f64, _>(StandardNormal)]);
            }
            raw_ok &= k == 0;
        }
        OutlierSource::Parameters { theta } => {
            let (r, w) = draw_rows(model, theta, k, with_raw, rng)?;
            rows.extend(r);
            raws.extend(w);
        }
        OutlierSource::Cauchy => {
            let c = Cauchy::new(0.0, 1.0).expect("valid scale");
            for _ in 0..k {
                rows.push((0..d).map(|_| rng.sample(c)).collect());
            }
            raw_ok &= k == 0;
        }
    }
    Ok(GeneratedObservations {
        dataset: Dataset::from_rows(rows)?,
        raw: raw_ok.then_some(raws),
        n_outliers: k,
    })
}

/// Generate a possibly contaminated dataset: clean draws first, then outliers.
pub fn generate_observations(spec: &ContaminationSpec, model: &dyn Simulator, rng: &mut SimRng) -> Result<Dataset> {
    Ok(generate_observations_with_raw(spec, model, rng)?.dataset)
}
