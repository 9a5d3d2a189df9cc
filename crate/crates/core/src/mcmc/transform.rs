use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Per-coordinate map from the parameter space to the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DimTransform {
    Identity,
    /// `u = ln((x - lower) / (upper - x))`.
    Logit { lower: f64, upper: f64 },
}

/// Coordinate-wise reparameterisation used by the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformSpec {
    dims: Vec<DimTransform>,
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl TransformSpec {
    pub fn new(dims: Vec<DimTransform>) -> Result<Self> {
        for d in &dims {
            if let DimTransform::Logit { lower, upper } = *d {
                if !(lower < upper && lower.is_finite() && upper.is_finite()) {
                    return invalid("transform", format!("logit bounds must satisfy lower < upper, got [{lower}, {upper}]"));
                }
            }
        }
        Ok(Self { dims })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            dims: vec![DimTransform::Identity; p],
        }
    }

    pub fn dims(&self) -> &[DimTransform] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Unconstrained coordinates and `ln|du/dtheta|`.
    pub fn forward(&self, theta: &[f64]) -> Result<(Vec<f64>, f64)> {
        if theta.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                found: theta.len(),
            });
        }
        let mut log_jac = 0.0;
        let mut u = Vec::with_capacity(theta.len());
        for (&x, d) in theta.iter().zip(&self.dims) {
            match *d {
                DimTransform::Identity => u.push(x),
                DimTransform::Logit { lower, upper } => {
                    if !(x > lower && x < upper) {
                        return Err(Error::Domain(format!("{x} is not inside ({lower}, {upper})")));
                    }
                    let (a, b) = (x - lower, upper - x);
                    u.push((a / b).ln());
                    log_jac += (upper - lower).ln() - a.ln() - b.ln();
                }
            }
        }
        Ok((u, log_jac))
    }

    /// Constrained coordinates and `ln|dtheta/du|`.
    pub fn inverse(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let mut log_jac = 0.0;
        let theta = u
            .iter()
            .zip(&self.dims)
            .map(|(&v, d)| match *d {
                DimTransform::Identity => v,
                DimTransform::Logit { lower, upper } => {
                    log_jac += (upper - lower).ln() - softplus(v) - softplus(-v);
                    // pick the expression that is accurate on each side of the midpoint
                    if v >= 0.0 {
                        upper - (upper - lower) * sigmoid(-v)
                    } else {
                        lower + (upper - lower) * sigmoid(v)
                    }
                }
            })
            .collect();
        (theta, log_jac)
    }
}

/// Map `theta` to unconstrained space; returns `ln|du/dtheta|` as well.
pub fn transform_forward(theta: &[f64], spec: &TransformSpec) -> Result<(Vec<f64>, f64)> {
    spec.forward(theta)
}

/// Map unconstrained `u` back to parameter space; returns `ln|dtheta/du|` as well.
pub fn transform_inverse(u: &[f64], spec: &TransformSpec) -> (Vec<f64>, f64) {
    spec.inverse(u)
}
