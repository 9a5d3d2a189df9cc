use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::SimRng;
use crate::scoring::cholesky_checked;

/// Symmetric Gaussian random-walk proposal in unconstrained space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Proposal {
    DiagonalNormal { sigma: Vec<f64> },
    FullNormal { covariance: Vec<Vec<f64>> },
}

impl Proposal {
    /// Same scale on every coordinate.
    pub fn isotropic(sigma: f64, p: usize) -> Self {
        Proposal::DiagonalNormal { sigma: vec![sigma; p] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Proposal::DiagonalNormal { sigma } => sigma.len(),
            Proposal::FullNormal { covariance } => covariance.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    pub(crate) fn prepare(&self) -> Result<PreparedProposal> {
        match self {
            Proposal::DiagonalNormal { sigma } => {
                if sigma.is_empty() || sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return invalid("chain.proposal.sigma", "proposal scales must be positive and finite");
                }
                Ok(PreparedProposal::Diagonal(sigma.clone()))
            }
            Proposal::FullNormal { covariance } => {
                let p = covariance.len();
                if p == 0 || covariance.iter().any(|r| r.len() != p) {
                    return invalid("chain.proposal.covariance", "covariance must be a non-empty square matrix");
                }
                let c = DMatrix::from_fn(p, p, |i, j| covariance[i][j]);
                if c != c.transpose() {
                    return invalid("chain.proposal.covariance", "covariance must be symmetric");
                }
                let l = cholesky_checked(&c)
                    .map_or_else(|| invalid("chain.proposal.covariance", "covariance must be positive definite"), Ok)?;
                Ok(PreparedProposal::Full(l))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PreparedProposal {
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

impl PreparedProposal {
    pub(crate) fn propose(&self, current: &[f64], rng: &mut SimRng) -> Vec<f64> {
        match self {
            PreparedProposal::Diagonal(sigma) => current
                .iter()
                .zip(sigma)
                .map(|(x, s)| x + s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            PreparedProposal::Full(l) => {
                let e = DVector::from_iterator(current.len(), (0..current.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let step = l * e;
                current.iter().zip(step.iter()).map(|(x, s)| x + s).collect()
            }
        }
    }
}
