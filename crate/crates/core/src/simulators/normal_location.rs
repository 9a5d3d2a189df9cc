use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SimulationBatch;
use crate::error::Result;
use crate::rng::SimRng;

use super::{require_draws, PriorComponent, PriorSpec, Simulator};

/// `m` draws from `N(theta, 1)`.
pub fn simulate_normal_location(theta: f64, m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
    require_draws(m)?;
    let xs: Vec<f64> = (0..m).map(|_| theta + rng.sample::<f64, _>(StandardNormal)).collect();
    SimulationBatch::from_flat(xs, m, 1)
}

/// Unit-variance normal with unknown mean and a standard normal prior.
#[derive(Debug, Clone)]
pub struct NormalLocation {
    prior: PriorSpec,
}

impl NormalLocation {
    pub fn new() -> Self {
        Self {
            prior: PriorSpec::new(vec![PriorComponent::Gaussian { mean: 0.0, sd: 1.0 }], None).expect("valid prior"),
        }
    }
}

impl Default for NormalLocation {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for NormalLocation {
    fn name(&self) -> &'static str {
        "normal-location"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["theta"]
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_normal_location(theta[0], m, rng)
    }
}
