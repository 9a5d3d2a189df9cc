//! Correlated pseudo-marginal Metropolis-Hastings on an unconstrained space.

mod chain;
mod proposal;
mod transform;

pub use chain::{
    chain_state_at, correlated_pm_step, estimate_target, log_target_estimate, run_chain, ChainConfig, ChainState,
    ChainTrace, RandomGroupState, TargetEstimate,
};
pub use proposal::Proposal;
pub use transform::{transform_forward, transform_inverse, DimTransform, TransformSpec};
