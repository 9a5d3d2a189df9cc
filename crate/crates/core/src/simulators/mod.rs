//! Simulator models, priors and observation generation.

mod boom_bust;
mod contamination;
mod gk;
mod lorenz96;
mod ma2;
mod mg1;
mod normal_location;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SimulationBatch;
use crate::error::{invalid, precondition, Error, Result};
use crate::mcmc::{DimTransform, TransformSpec};
use crate::rng::SimRng;

pub use boom_bust::{boom_bust_statistics, simulate_boom_bust, simulate_boom_bust_series, BoomBust, BOOM_BUST_BURN_IN, BOOM_BUST_LEN};
pub use contamination::{generate_observations, generate_observations_with_raw, ContaminationSpec, GeneratedObservations, OutlierSource};
pub use gk::{gk_transform, simulate_gk, simulate_multi_gk, GkMultivariate, GkUnivariate};
pub use lorenz96::{
    integrate_lorenz96, lorenz96_statistics, simulate_lorenz96, Lorenz96, LORENZ_DT, LORENZ_INITIAL_STATE, LORENZ_SITES, LORENZ_STEPS,
};
pub use ma2::{simulate_ma2, Ma2};
pub use mg1::{mg1_from_inputs, simulate_mg1, Mg1, Mg1Formulation, Mg1Inputs};
pub use normal_location::{simulate_normal_location, NormalLocation};

/// A parameter value with per-dimension labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub names: Vec<String>,
}

impl ParamVector {
    pub fn new(model: &dyn Simulator, theta: Vec<f64>) -> Result<Self> {
        model.check_theta(&theta)?;
        Ok(Self {
            theta,
            names: model.param_names().iter().map(|s| s.to_string()).collect(),
        })
    }
}

/// One independent prior factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorComponent {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl PriorComponent {
    fn validate(&self) -> Result<()> {
        match *self {
            PriorComponent::Uniform { lower, upper } if !(lower < upper && lower.is_finite() && upper.is_finite()) => {
                invalid("prior", format!("uniform bounds must satisfy lower < upper, got [{lower}, {upper}]"))
            }
            PriorComponent::Gaussian { sd, .. } if !(sd > 0.0 && sd.is_finite()) => {
                invalid("prior", format!("gaussian sd must be positive, got {sd}"))
            }
            _ => Ok(()),
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        match *self {
            PriorComponent::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorComponent::Gaussian { mean, sd } => {
                let u = (x - mean) / sd;
                -0.5 * u * u - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            PriorComponent::Uniform { lower, upper } => rng.random_range(lower..upper),
            PriorComponent::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + sd * z
            }
        }
    }
}

/// Extra support restriction applied on top of independent box factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportConstraint {
    /// `-1 < t2 < 1`, `t1 + t2 > -1`, `t1 - t2 < 1`: the invertible MA(2) region.
    Ma2Triangle,
}

impl SupportConstraint {
    fn contains(&self, theta: &[f64]) -> bool {
        match self {
            SupportConstraint::Ma2Triangle => {
                let (a, b) = (theta[0], theta[1]);
                b > -1.0 && b < 1.0 && a + b > -1.0 && a - b < 1.0
            }
        }
    }

    /// Log of (box volume / constrained volume), renormalising the box density.
    fn log_mass_correction(&self, components: &[PriorComponent]) -> f64 {
        match self {
            SupportConstraint::Ma2Triangle => {
                let box_area: f64 = components
                    .iter()
                    .map(|c| match *c {
                        PriorComponent::Uniform { lower, upper } => upper - lower,
                        PriorComponent::Gaussian { .. } => f64::NAN,
                    })
                    .product();
                (box_area / 4.0).ln()
            }
        }
    }
}

/// Product prior, optionally truncated to a constrained region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    components: Vec<PriorComponent>,
    #[serde(default)]
    constraint: Option<SupportConstraint>,
}

impl PriorSpec {
    pub fn new(components: Vec<PriorComponent>, constraint: Option<SupportConstraint>) -> Result<Self> {
        if components.is_empty() {
            return invalid("prior", "prior needs at least one component");
        }
        for c in &components {
            c.validate()?;
        }
        if let Some(SupportConstraint::Ma2Triangle) = constraint {
            let ok = components.len() == 2
                && components.iter().all(|c| matches!(c, PriorComponent::Uniform { .. }));
            if !ok {
                return invalid("prior", "triangle constraint needs a two-dimensional uniform box");
            }
        }
        Ok(Self { components, constraint })
    }

    pub fn uniform_box(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            bounds
                .iter()
                .map(|&(lower, upper)| PriorComponent::Uniform { lower, upper })
                .collect(),
            None,
        )
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[PriorComponent] {
        &self.components
    }

    pub fn constraint(&self) -> Option<SupportConstraint> {
        self.constraint
    }

    pub fn in_support(&self, theta: &[f64]) -> bool {
        self.log_density(theta) > f64::NEG_INFINITY
    }

    /// Log prior density; `-inf` outside the support or on a length mismatch.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() || theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let mut lp: f64 = self.components.iter().zip(theta).map(|(c, &x)| c.log_density(x)).sum();
        if let Some(con) = &self.constraint {
            if !con.contains(theta) {
                return f64::NEG_INFINITY;
            }
            lp += con.log_mass_correction(&self.components);
        }
        lp
    }

    /// One prior draw, by rejection when a constraint is present.
    pub fn sample(&self, rng: &mut SimRng) -> Vec<f64> {
        loop {
            let theta: Vec<f64> = self.components.iter().map(|c| c.sample(rng)).collect();
            match &self.constraint {
                Some(con) if !con.contains(&theta) => continue,
                _ => return theta,
            }
        }
    }

    /// Logit maps for bounded factors and identity for unbounded ones.
    pub fn default_transform(&self) -> TransformSpec {
        TransformSpec::new(
            self.components
                .iter()
                .map(|c| match *c {
                    PriorComponent::Uniform { lower, upper } => DimTransform::Logit { lower, upper },
                    PriorComponent::Gaussian { .. } => DimTransform::Identity,
                })
                .collect(),
        )
        .expect("prior bounds are validated")
    }
}

/// A simulator model: parameter space, prior and a sampling routine.
pub trait Simulator: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn param_names(&self) -> &'static [&'static str];

    /// Dimension of one simulated output (after summaries, if any).
    fn output_dim(&self) -> usize;

    fn prior(&self) -> &PriorSpec;

    /// Draw `m` outputs at `theta`. Deterministic given the stream state.
    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch>;

    fn theta_dim(&self) -> usize {
        self.param_names().len()
    }

    /// `(channels, timesteps)` of the raw series behind the summaries, for
    /// models whose outputs are statistics of a time series.
    fn raw_shape(&self) -> Option<(usize, usize)> {
        None
    }

    /// One raw series, laid out channel-major (`channels x timesteps`).
    fn simulate_raw(&self, _theta: &[f64], _rng: &mut SimRng) -> Result<Vec<f64>> {
        precondition(format!("model {} has no raw series", self.name()))
    }

    /// Summary statistics of one raw series.
    fn summarize(&self, _raw: &[f64]) -> Result<Vec<f64>> {
        precondition(format!("model {} has no summary map", self.name()))
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_dim(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return precondition("parameter contains non-finite entries");
        }
        Ok(())
    }
}

/// Simulate `m` raw series and summarise each, sharing one stream.
pub(crate) fn simulate_via_summaries(
    model: &dyn Simulator,
    theta: &[f64],
    m: usize,
    rng: &mut SimRng,
) -> Result<SimulationBatch> {
    require_draws(m)?;
    let d = model.output_dim();
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m {
        let raw = model.simulate_raw(theta, rng)?;
        data.extend(model.summarize(&raw)?);
    }
    SimulationBatch::from_flat(data, m, d)
}

pub(crate) fn require_draws(m: usize) -> Result<()> {
    if m == 0 {
        return precondition("number of simulations must be at least 1");
    }
    Ok(())
}

/// The models shipped with the library, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    GkUnivariate,
    GkMultivariate,
    Ma2,
    Mg1,
    Lorenz96,
    BoomBust,
    NormalLocation,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::GkUnivariate,
        ModelKind::GkMultivariate,
        ModelKind::Ma2,
        ModelKind::Mg1,
        ModelKind::Lorenz96,
        ModelKind::BoomBust,
        ModelKind::NormalLocation,
    ];

    pub fn build(self) -> Box<dyn Simulator> {
        match self {
            ModelKind::GkUnivariate => Box::new(GkUnivariate::new()),
            ModelKind::GkMultivariate => Box::new(GkMultivariate::new()),
            ModelKind::Ma2 => Box::new(Ma2::new()),
            ModelKind::Mg1 => Box::new(Mg1::new()),
            ModelKind::Lorenz96 => Box::new(Lorenz96::new()),
            ModelKind::BoomBust => Box::new(BoomBust::new()),
            ModelKind::NormalLocation => Box::new(NormalLocation::new()),
        }
    }
}
