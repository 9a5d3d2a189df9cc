use crate::data::{Observation, SimulationBatch};
use crate::error::{Error, Result};

use super::energy::sq_dist;
use super::{check_dims, require_pairs, GaussianKernel};

#[inline]
fn kernel_from_sq(sq: f64, kern: GaussianKernel) -> f64 {
    (-sq / (2.0 * kern.gamma * kern.gamma)).exp()
}

/// `exp(-|x - y|^2 / (2 gamma^2))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], kern: GaussianKernel) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    kern.validate()?;
    Ok(kernel_from_sq(sq_dist(x, y), kern))
}

/// Mean kernel value over ordered pairs `j != k` of the batch.
pub fn kernel_pair_mean(batch: &SimulationBatch, kern: GaussianKernel) -> Result<f64> {
    require_pairs(batch)?;
    kern.validate()?;
    let m = batch.len();
    let mut s = 0.0;
    for j in 0..m {
        let xj = batch.row(j);
        for k in (j + 1)..m {
            s += kernel_from_sq(sq_dist(xj, batch.row(k)), kern);
        }
    }
    Ok(2.0 * s / (m * (m - 1)) as f64)
}

pub(crate) fn mean_kernel_to(batch: &SimulationBatch, y: &[f64], kern: GaussianKernel) -> f64 {
    batch.rows().map(|x| kernel_from_sq(sq_dist(x, y), kern)).sum::<f64>() / batch.len() as f64
}

/// Unbiased estimate of the kernel score of the simulator at `y`.
pub fn kernel_score_estimate(batch: &SimulationBatch, y: &Observation, kern: GaussianKernel) -> Result<f64> {
    check_dims(batch, y.values())?;
    let pair = kernel_pair_mean(batch, kern)?;
    Ok(pair - 2.0 * mean_kernel_to(batch, y.values(), kern))
}
