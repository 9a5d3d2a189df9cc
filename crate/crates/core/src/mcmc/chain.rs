use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SimulationBatch};
use crate::error::{invalid, precondition, Error, Result};
use crate::rng::{seeded, SimRng};
use crate::scoring::{total_score, ScoringRuleConfig};
use crate::simulators::Simulator;

use super::proposal::{PreparedProposal, Proposal};
use super::transform::TransformSpec;

/// Prior redraws allowed when looking for a finite starting target.
const MAX_INIT_ATTEMPTS: usize = 1000;

/// Settings for one correlated pseudo-marginal chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Learning rate multiplying the total score.
    pub w: f64,
    /// Simulations per target evaluation.
    pub m: usize,
    /// Number of independently refreshed seed groups.
    pub groups: usize,
    pub proposal: Proposal,
    /// Defaults to the prior's own transform when absent.
    #[serde(default)]
    pub transform: Option<TransformSpec>,
    pub scoring: ScoringRuleConfig,
    pub master_seed: u64,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.steps {
            return invalid("chain.burn_in", format!("burn-in ({}) must be below steps ({})", self.burn_in, self.steps));
        }
        if self.thinning == 0 {
            return invalid("chain.thinning", "thinning must be at least 1");
        }
        if !(self.w.is_finite() && self.w > 0.0) {
            return invalid("chain.w", format!("learning rate must be positive, got {}", self.w));
        }
        self.validate_simulation()?;
        self.proposal.validate()?;
        self.scoring.validate()
    }

    fn validate_simulation(&self) -> Result<()> {
        if self.m < 2 {
            return invalid("chain.m", format!("need at least 2 simulations, got {}", self.m));
        }
        if self.groups == 0 || self.m % self.groups != 0 {
            return invalid("chain.groups", format!("G must divide m (m = {}, G = {})", self.m, self.groups));
        }
        Ok(())
    }

    /// Number of samples kept after burn-in and thinning.
    pub fn retained(&self) -> usize {
        (self.steps - self.burn_in) / self.thinning
    }

    fn resolved_transform(&self, model: &dyn Simulator) -> Result<TransformSpec> {
        let t = self.transform.clone().unwrap_or_else(|| model.prior().default_transform());
        if t.len() != model.theta_dim() || self.proposal.dim() != model.theta_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.theta_dim(),
                found: if t.len() != model.theta_dim() { t.len() } else { self.proposal.dim() },
            });
        }
        Ok(t)
    }
}

/// One seed per simulation group; group `j` produces `m / G` draws.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomGroupState {
    pub seeds: Vec<u64>,
}

impl RandomGroupState {
    pub fn new(seeds: Vec<u64>) -> Result<Self> {
        if seeds.is_empty() {
            return precondition("need at least one seed group");
        }
        Ok(Self { seeds })
    }

    pub fn draw(groups: usize, rng: &mut SimRng) -> Self {
        Self {
            seeds: (0..groups).map(|_| rng.random()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    /// Simulate `m` draws, group by group in a fixed order.
    pub fn simulate(&self, model: &dyn Simulator, theta: &[f64], m: usize) -> Result<SimulationBatch> {
        let g = self.seeds.len();
        if g == 0 || m % g != 0 || m == 0 {
            return precondition(format!("G must divide m (m = {m}, G = {g})"));
        }
        let per = m / g;
        let parts = self
            .seeds
            .iter()
            .map(|&s| model.simulate(theta, per, &mut seeded(s)))
            .collect::<Result<Vec<_>>>()?;
        SimulationBatch::concat(&parts)
    }
}

/// Log target estimate with the total score behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    pub log_target: f64,
    /// `NaN` when the parameter lies outside the prior support.
    pub score: f64,
}

/// Estimate of `log prior - w * total score`, or `-inf` outside the support.
pub fn estimate_target(
    theta: &[f64],
    groups: &RandomGroupState,
    model: &dyn Simulator,
    data: &Dataset,
    cfg: &ChainConfig,
) -> Result<TargetEstimate> {
    let lp = model.prior().log_density(theta);
    if lp == f64::NEG_INFINITY {
        return Ok(TargetEstimate {
            log_target: f64::NEG_INFINITY,
            score: f64::NAN,
        });
    }
    if cfg.w == 0.0 {
        return Ok(TargetEstimate { log_target: lp, score: 0.0 });
    }
    let batch = groups.simulate(model, theta, cfg.m)?;
    let score = total_score(&batch, data, &cfg.scoring)?;
    Ok(TargetEstimate {
        log_target: lp - cfg.w * score,
        score,
    })
}

pub fn log_target_estimate(
    theta: &[f64],
    groups: &RandomGroupState,
    model: &dyn Simulator,
    data: &Dataset,
    cfg: &ChainConfig,
) -> Result<f64> {
    Ok(estimate_target(theta, groups, model, data, cfg)?.log_target)
}

/// Current position of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub theta_unconstrained: Vec<f64>,
    pub groups: RandomGroupState,
    pub current_log_target: f64,
    pub current_score: f64,
    /// `ln|dtheta/du|` at the current point.
    pub log_jacobian: f64,
}

/// Sample path and bookkeeping of a finished chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub param_names: Vec<String>,
    /// Retained parameter values, one row per kept sample.
    pub samples: Vec<Vec<f64>>,
    /// Log target at each retained sample.
    pub sample_log_target: Vec<f64>,
    /// Whether the step producing each retained sample was an acceptance.
    pub sample_accepted: Vec<bool>,
    pub accepted: usize,
    pub proposed: usize,
    /// Total score of the chain's current state after every step.
    pub per_step_scores: Vec<f64>,
    pub per_step_log_target: Vec<f64>,
    pub per_step_accepted: Vec<bool>,
    pub initial_theta: Vec<f64>,
    pub initial_seeds: Vec<u64>,
}

impl ChainTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    /// Column `k` of the retained samples.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }
}

/// Everything a step needs that does not change between steps.
struct Kernel<'a> {
    model: &'a dyn Simulator,
    data: &'a Dataset,
    cfg: &'a ChainConfig,
    proposal: PreparedProposal,
    transform: TransformSpec,
}

impl<'a> Kernel<'a> {
    fn new(model: &'a dyn Simulator, data: &'a Dataset, cfg: &'a ChainConfig) -> Result<Self> {
        if data.dim() != model.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.output_dim(),
                found: data.dim(),
            });
        }
        Ok(Self {
            model,
            data,
            cfg,
            proposal: cfg.proposal.prepare()?,
            transform: cfg.resolved_transform(model)?,
        })
    }

    fn state_at(&self, theta: Vec<f64>, groups: RandomGroupState) -> Result<ChainState> {
        let (u, _) = self.transform.forward(&theta)?;
        let (_, log_jacobian) = self.transform.inverse(&u);
        let est = estimate_target(&theta, &groups, self.model, self.data, self.cfg)?;
        Ok(ChainState {
            theta,
            theta_unconstrained: u,
            groups,
            current_log_target: est.log_target,
            current_score: est.score,
            log_jacobian,
        })
    }

    fn initial_state(&self, rng: &mut SimRng) -> Result<ChainState> {
        let groups = RandomGroupState::draw(self.cfg.groups, rng);
        if let Some(start) = &self.cfg.start {
            let s = self.state_at(start.clone(), groups)?;
            if s.current_log_target == f64::NEG_INFINITY {
                return precondition("configured start lies outside the prior support");
            }
            return Ok(s);
        }
        let mut last_err = None;
        for _ in 0..MAX_INIT_ATTEMPTS {
            let theta = self.model.prior().sample(rng);
            match self.state_at(theta, groups.clone()) {
                Ok(s) if s.current_log_target.is_finite() => return Ok(s),
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        Err(Error::Simulation(format!(
            "no prior draw gave a finite target after {MAX_INIT_ATTEMPTS} attempts{}",
            last_err.map(|e| format!(" (last error: {e})")).unwrap_or_default()
        )))
    }

    fn step(&self, state: &ChainState, rng: &mut SimRng) -> (Option<ChainState>, bool) {
        let u_new = self.proposal.propose(&state.theta_unconstrained, rng);
        let (theta_new, lj_new) = self.transform.inverse(&u_new);
        let mut groups_new = state.groups.clone();
        let j = rng.random_range(0..groups_new.len());
        groups_new.seeds[j] = rng.random();
        let log_u = rng.random::<f64>().ln();

        let est = match estimate_target(&theta_new, &groups_new, self.model, self.data, self.cfg) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("target evaluation failed at {theta_new:?}, rejecting: {e}");
                return (None, false);
            }
        };
        if !(est.log_target > f64::NEG_INFINITY) || est.log_target.is_nan() {
            return (None, false);
        }
        let log_alpha = (est.log_target + lj_new) - (state.current_log_target + state.log_jacobian);
        if log_u < log_alpha {
            let next = ChainState {
                theta: theta_new,
                theta_unconstrained: u_new,
                groups: groups_new,
                current_log_target: est.log_target,
                current_score: est.score,
                log_jacobian: lj_new,
            };
            (Some(next), true)
        } else {
            (None, false)
        }
    }
}

/// One correlated pseudo-marginal Metropolis-Hastings step.
///
/// Proposes a random-walk move in unconstrained space, refreshes the seed of
/// one uniformly chosen group, and accepts with the Jacobian-corrected ratio.
/// On rejection the returned state equals the input, seeds included.
pub fn correlated_pm_step(
    state: &ChainState,
    model: &dyn Simulator,
    data: &Dataset,
    cfg: &ChainConfig,
    rng: &mut SimRng,
) -> Result<(ChainState, bool)> {
    let kernel = Kernel::new(model, data, cfg)?;
    Ok(match kernel.step(state, rng) {
        (Some(next), accepted) => (next, accepted),
        (None, _) => (state.clone(), false),
    })
}

/// Build the state a chain would start from at `theta` with the given seeds.
pub fn chain_state_at(
    theta: Vec<f64>,
    groups: RandomGroupState,
    model: &dyn Simulator,
    data: &Dataset,
    cfg: &ChainConfig,
) -> Result<ChainState> {
    Kernel::new(model, data, cfg)?.state_at(theta, groups)
}

/// Run a full chain. Deterministic given `cfg.master_seed`.
pub fn run_chain(model: &dyn Simulator, data: &Dataset, cfg: &ChainConfig) -> Result<ChainTrace> {
    cfg.validate()?;
    let kernel = Kernel::new(model, data, cfg)?;
    let mut rng = seeded(cfg.master_seed);
    let mut state = kernel.initial_state(&mut rng)?;

    let retained = cfg.retained();
    let mut trace = ChainTrace {
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        samples: Vec::with_capacity(retained),
        sample_log_target: Vec::with_capacity(retained),
        sample_accepted: Vec::with_capacity(retained),
        accepted: 0,
        proposed: 0,
        per_step_scores: Vec::with_capacity(cfg.steps),
        per_step_log_target: Vec::with_capacity(cfg.steps),
        per_step_accepted: Vec::with_capacity(cfg.steps),
        initial_theta: state.theta.clone(),
        initial_seeds: state.groups.seeds.clone(),
    };

    let report_every = (cfg.steps / 10).max(1);
    for step in 1..=cfg.steps {
        let (next, accepted) = kernel.step(&state, &mut rng);
        if let Some(next) = next {
            state = next;
        }
        trace.proposed += 1;
        trace.accepted += usize::from(accepted);
        trace.per_step_scores.push(state.current_score);
        trace.per_step_log_target.push(state.current_log_target);
        trace.per_step_accepted.push(accepted);
        if step > cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == 0 {
            trace.samples.push(state.theta.clone());
            trace.sample_log_target.push(state.current_log_target);
            trace.sample_accepted.push(accepted);
        }
        if step % report_every == 0 {
            log::info!(
                "step {step}/{}: acceptance {:.3}",
                cfg.steps,
                trace.accepted as f64 / trace.proposed as f64
            );
        }
    }
    Ok(trace)
}
