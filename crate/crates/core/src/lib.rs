//! Generalised Bayesian likelihood-free inference with scoring-rule posteriors.
//!
//! The crate provides sample-based estimators of proper scoring rules
//! ([`scoring`]), a suite of simulator models ([`simulators`]), a correlated
//! pseudo-marginal MCMC sampler for the resulting posteriors ([`mcmc`]),
//! heuristics for the learning rate and kernel bandwidth ([`tuning`]) and
//! posterior predictive diagnostics ([`diagnostics`]).

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod mcmc;
pub mod rng;
pub mod scoring;
pub mod simulators;
pub mod tuning;

pub use data::{Dataset, Observation, SimulationBatch};
pub use error::{Error, Result};
pub use mcmc::{run_chain, ChainConfig, ChainTrace, Proposal};
pub use scoring::{total_score, ScoringRuleConfig};
pub use simulators::{ModelKind, Simulator};
