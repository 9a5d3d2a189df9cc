use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::data::SimulationBatch;
use crate::error::{precondition, Result};
use crate::rng::SimRng;

use super::{require_draws, PriorSpec, Simulator};

pub const MG1_LEN: usize = 50;

/// Smallest interdeparture time passed to the logarithm.
const MIN_TIME: f64 = 1e-300;

/// Which recursion produces the interdeparture times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mg1Formulation {
    /// Arrival and departure clocks.
    #[default]
    Direct,
    /// Waiting-time recursion.
    Lindley,
}

/// The service and interarrival draws behind one queue realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mg1Inputs {
    pub service: Vec<f64>,
    pub interarrival: Vec<f64>,
}

impl Mg1Inputs {
    /// Service times uniform on `[lo, hi]`, interarrivals exponential with rate `rate`.
    pub fn draw(lo: f64, hi: f64, rate: f64, rng: &mut SimRng) -> Result<Self> {
        if !(lo >= 0.0 && hi >= lo && rate > 0.0 && hi.is_finite() && rate.is_finite()) {
            return precondition(format!(
                "queue parameters need 0 <= service_min <= service_max and rate > 0, got ({lo}, {hi}, {rate})"
            ));
        }
        let exp = Exp::new(rate).map_err(|e| crate::error::Error::Precondition(e.to_string()))?;
        let mut service = Vec::with_capacity(MG1_LEN);
        let mut interarrival = Vec::with_capacity(MG1_LEN);
        for _ in 0..MG1_LEN {
            service.push(lo + (hi - lo) * rng.random::<f64>());
            interarrival.push(exp.sample(rng));
        }
        Ok(Self { service, interarrival })
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Running sum kept as an unevaluated pair so differences of large clocks stay exact.
#[derive(Clone, Copy, Default)]
struct Clock {
    hi: f64,
    lo: f64,
}

impl Clock {
    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    fn minus(self, other: Clock) -> f64 {
        (self.hi - other.hi) + (self.lo - other.lo)
    }
}

/// Interdeparture times (not logged) from fixed draws.
pub fn mg1_interdepartures(inputs: &Mg1Inputs, formulation: Mg1Formulation) -> Vec<f64> {
    let n = inputs.service.len();
    let mut y = Vec::with_capacity(n);
    match formulation {
        Mg1Formulation::Direct => {
            let mut arrival = Clock::default();
            let mut departure = Clock::default();
            for i in 0..n {
                arrival.add(inputs.interarrival[i]);
                let yi = inputs.service[i] + arrival.minus(departure).max(0.0);
                departure.add(yi);
                y.push(yi);
            }
        }
        Mg1Formulation::Lindley => {
            let (mut wait, mut prev_service) = (0.0f64, 0.0f64);
            for i in 0..n {
                let w = inputs.interarrival[i];
                let u = inputs.service[i];
                y.push(u + (w - wait - prev_service).max(0.0));
                wait = (wait + prev_service - w).max(0.0);
                prev_service = u;
            }
        }
    }
    y
}

/// Log interdeparture times from fixed draws.
pub fn mg1_from_inputs(inputs: &Mg1Inputs, formulation: Mg1Formulation) -> Vec<f64> {
    mg1_interdepartures(inputs, formulation)
        .into_iter()
        .map(|t| t.max(MIN_TIME).ln())
        .collect()
}

/// `m` queue outputs at natural parameters `(service_min, service_max, arrival_rate)`.
pub fn simulate_mg1(
    theta: &[f64],
    m: usize,
    rng: &mut SimRng,
    formulation: Mg1Formulation,
) -> Result<SimulationBatch> {
    require_draws(m)?;
    let mut data = Vec::with_capacity(m * MG1_LEN);
    for _ in 0..m {
        let inputs = Mg1Inputs::draw(theta[0], theta[1], theta[2], rng)?;
        data.extend(mg1_from_inputs(&inputs, formulation));
    }
    SimulationBatch::from_flat(data, m, MG1_LEN)
}

/// M/G/1 queue parameterised as `(service_min, service_width, arrival_rate)`.
#[derive(Debug, Clone)]
pub struct Mg1 {
    prior: PriorSpec,
    formulation: Mg1Formulation,
}

impl Mg1 {
    pub fn new() -> Self {
        Self::with_formulation(Mg1Formulation::Direct)
    }

    pub fn with_formulation(formulation: Mg1Formulation) -> Self {
        Self {
            prior: PriorSpec::uniform_box(&[(0.0, 10.0), (0.0, 10.0), (0.0, 1.0 / 3.0)]).expect("valid bounds"),
            formulation,
        }
    }

    /// Map `(min, width, rate)` to `(min, max, rate)`.
    pub fn natural(theta: &[f64]) -> [f64; 3] {
        [theta[0], theta[0] + theta[1], theta[2]]
    }
}

impl Default for Mg1 {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for Mg1 {
    fn name(&self) -> &'static str {
        "mg1"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["service_min", "service_width", "arrival_rate"]
    }

    fn output_dim(&self) -> usize {
        MG1_LEN
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_mg1(&Self::natural(theta), m, rng, self.formulation)
    }
}
