use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SimulationBatch;
use crate::error::Result;
use crate::rng::SimRng;

use super::{require_draws, PriorComponent, PriorSpec, Simulator, SupportConstraint};

pub const MA2_LEN: usize = 50;

/// `m` MA(2) series of length 50 at `theta = (t1, t2)`.
pub fn simulate_ma2(theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
    require_draws(m)?;
    let (t1, t2) = (theta[0], theta[1]);
    let mut data = Vec::with_capacity(m * MA2_LEN);
    let mut xi = [0.0f64; MA2_LEN];
    for _ in 0..m {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        data.push(xi[0]);
        data.push(xi[1] + t1 * xi[0]);
        for t in 2..MA2_LEN {
            data.push(xi[t] + t1 * xi[t - 1] + t2 * xi[t - 2]);
        }
    }
    SimulationBatch::from_flat(data, m, MA2_LEN)
}

#[derive(Debug, Clone)]
pub struct Ma2 {
    prior: PriorSpec,
}

impl Ma2 {
    pub fn new() -> Self {
        Self {
            prior: PriorSpec::new(
                vec![
                    PriorComponent::Uniform { lower: -2.0, upper: 2.0 },
                    PriorComponent::Uniform { lower: -1.0, upper: 1.0 },
                ],
                Some(SupportConstraint::Ma2Triangle),
            )
            .expect("valid bounds"),
        }
    }
}

impl Default for Ma2 {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for Ma2 {
    fn name(&self) -> &'static str {
        "ma2"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["theta1", "theta2"]
    }

    fn output_dim(&self) -> usize {
        MA2_LEN
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_ma2(theta, m, rng)
    }
}
