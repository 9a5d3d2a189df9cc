use nalgebra::{DMatrix, DVector};

use crate::data::{Observation, SimulationBatch};
use crate::error::{Error, Result};

use super::check_dims;

/// Relative pivot size below which a Cholesky factor is treated as singular.
const PIVOT_TOL: f64 = 1e-14;

/// Lower Cholesky factor of a symmetric matrix, or `None` when it is not
/// numerically positive definite.
pub(crate) fn cholesky_checked(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let scale = a.diagonal().iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let l = a.clone().cholesky()?.unpack();
    if l.diagonal().iter().any(|&p| !(p * p > PIVOT_TOL * scale)) {
        return None;
    }
    Some(l)
}

/// Gaussian moment fit of a batch: sample mean and unbiased covariance.
#[derive(Debug, Clone)]
pub struct GaussianFit {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl GaussianFit {
    pub fn fit(batch: &SimulationBatch) -> Result<Self> {
        let m = batch.len();
        let d = batch.dim();
        if m < 2 {
            return Err(Error::Precondition(format!(
                "moment fit needs at least 2 simulations, got {m}"
            )));
        }
        let mut mean = DVector::zeros(d);
        for r in batch.rows() {
            for (acc, v) in mean.iter_mut().zip(r) {
                *acc += v;
            }
        }
        mean /= m as f64;

        let mut cov = DMatrix::zeros(d, d);
        let mut c = DVector::zeros(d);
        for r in batch.rows() {
            for k in 0..d {
                c[k] = r[k] - mean[k];
            }
            cov.syger(1.0, &c, &c, 1.0);
        }
        cov.fill_upper_triangle_with_lower_triangle();
        cov /= (m - 1) as f64;

        let chol = cholesky_checked(&cov).ok_or(Error::DegenerateCovariance)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { mean, chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Squared Mahalanobis distance of `y` from the fitted mean.
    pub fn mahalanobis_sq(&self, y: &[f64]) -> f64 {
        let diff = DVector::from_iterator(y.len(), y.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("factor has a positive diagonal");
        z.norm_squared()
    }

    /// `ln|cov| + (y - mean)' cov^-1 (y - mean)`.
    pub fn ds_score(&self, y: &[f64]) -> f64 {
        self.log_det + self.mahalanobis_sq(y)
    }

    /// Gaussian log density at `y` under the fitted moments.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let d = self.dim() as f64;
        -0.5 * (self.ds_score(y) + d * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Dawid-Sebastiani score of the batch's Gaussian moment fit at `y`.
pub fn ds_score_estimate(batch: &SimulationBatch, y: &Observation) -> Result<f64> {
    check_dims(batch, y.values())?;
    Ok(GaussianFit::fit(batch)?.ds_score(y.values()))
}
