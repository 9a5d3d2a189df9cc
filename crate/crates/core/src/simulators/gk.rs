use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SimulationBatch;
use crate::error::{precondition, Result};
use crate::rng::SimRng;
use crate::scoring::cholesky_checked;

use super::{require_draws, PriorComponent, PriorSpec, Simulator};

/// Output dimension of the multivariate g-and-k model.
pub const MULTI_GK_DIM: usize = 5;

/// g-and-k quantile transform of a standard normal draw `z`.
pub fn gk_transform(z: f64, a: f64, b: f64, g: f64, k: f64) -> f64 {
    // (1 - e^{-gz}) / (1 + e^{-gz}) written as tanh to avoid overflow for large |gz|
    let skew = 1.0 + 0.8 * (0.5 * g * z).tanh();
    a + b * skew * (1.0 + z * z).powf(k) * z
}

fn check_gk(theta: &[f64]) -> Result<()> {
    if theta.iter().any(|v| !v.is_finite()) {
        return precondition("g-and-k parameters must be finite");
    }
    Ok(())
}

/// `m` univariate g-and-k draws at `theta = (A, B, g, k)`.
pub fn simulate_gk(theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
    require_draws(m)?;
    check_gk(theta)?;
    let (a, b, g, k) = (theta[0], theta[1], theta[2], theta[3]);
    let xs: Vec<f64> = (0..m)
        .map(|_| gk_transform(rng.sample(StandardNormal), a, b, g, k))
        .collect();
    SimulationBatch::from_flat(xs, m, 1)
}

/// Cholesky factor of the unit-diagonal tridiagonal correlation with off-diagonal `rho`.
fn tridiagonal_factor(rho: f64) -> Result<DMatrix<f64>> {
    let d = MULTI_GK_DIM;
    let sigma = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            rho
        } else {
            0.0
        }
    });
    cholesky_checked(&sigma)
        .map_or_else(|| precondition(format!("correlation {rho} gives a non positive definite covariance")), Ok)
}

/// `m` five-dimensional g-and-k draws at `theta = (A, B, g, k, rho)`.
pub fn simulate_multi_gk(theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
    require_draws(m)?;
    check_gk(theta)?;
    let (a, b, g, k, rho) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
    let l = tridiagonal_factor(rho)?;
    let mut data = Vec::with_capacity(m * MULTI_GK_DIM);
    let mut e = DVector::zeros(MULTI_GK_DIM);
    for _ in 0..m {
        for v in e.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let z = &l * &e;
        data.extend(z.iter().map(|&zi| gk_transform(zi, a, b, g, k)));
    }
    SimulationBatch::from_flat(data, m, MULTI_GK_DIM)
}

#[derive(Debug, Clone)]
pub struct GkUnivariate {
    prior: PriorSpec,
}

impl GkUnivariate {
    pub fn new() -> Self {
        Self {
            prior: PriorSpec::uniform_box(&[(0.0, 4.0); 4]).expect("valid bounds"),
        }
    }
}

impl Default for GkUnivariate {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for GkUnivariate {
    fn name(&self) -> &'static str {
        "gk-univariate"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["A", "B", "g", "k"]
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_gk(theta, m, rng)
    }
}

#[derive(Debug, Clone)]
pub struct GkMultivariate {
    prior: PriorSpec,
}

impl GkMultivariate {
    pub fn new() -> Self {
        let r = 3f64.sqrt() / 3.0;
        let mut comps = vec![PriorComponent::Uniform { lower: 0.0, upper: 4.0 }; 4];
        comps.push(PriorComponent::Uniform { lower: -r, upper: r });
        Self {
            prior: PriorSpec::new(comps, None).expect("valid bounds"),
        }
    }
}

impl Default for GkMultivariate {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for GkMultivariate {
    fn name(&self) -> &'static str {
        "gk-multivariate"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["A", "B", "g", "k", "rho"]
    }

    fn output_dim(&self) -> usize {
        MULTI_GK_DIM
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_multi_gk(theta, m, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn transform_examples() {
        assert_eq!(gk_transform(0.0, 3.0, 1.5, 0.5, 1.5), 3.0);
        assert_eq!(gk_transform(1.0, 3.0, 1.5, 0.0, 0.0), 4.5);
        // direct evaluation with the exponential form
        let g: f64 = 0.5;
        let bracket = 1.0 + 0.8 * (1.0 - (-g).exp()) / (1.0 + (-g).exp());
        let expected = 3.0 + 1.5 * bracket * 2f64.powf(1.5);
        let v = gk_transform(1.0, 3.0, 1.5, 0.5, 1.5);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 8.0737).abs() < 1e-3);
    }

    #[test]
    fn zero_draws_rejected() {
        assert!(simulate_gk(&[3.0, 1.0, 0.0, 0.0], 0, &mut seeded(1)).is_err());
    }

    #[test]
    fn normal_reduction_when_g_and_k_vanish() {
        let m = 100_000;
        let b = simulate_gk(&[3.0, 1.5, 0.0, 0.0], m, &mut seeded(2)).unwrap();
        let xs = b.as_flat();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
        let se = 1.5 / (m as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se);
        // sd of the sample sd is about sigma / sqrt(2m)
        assert!((sd - 1.5).abs() < 3.0 * 1.5 / (2.0 * m as f64).sqrt());

        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = Normal::new(3.0, 1.5).unwrap();
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = n.cdf(x);
                (f - i as f64 / m as f64).abs().max(((i + 1) as f64 / m as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
    }

    #[test]
    fn multivariate_latent_correlation() {
        // g = k = 0, A = 0, B = 1 makes the output equal the latent normals.
        let m = 100_000;
        let b = simulate_multi_gk(&[0.0, 1.0, 0.0, 0.0, -0.3], m, &mut seeded(4)).unwrap();
        for k in 0..4 {
            let (x, y) = (b.column(k), b.column(k + 1));
            let c = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / m as f64;
            assert!((c + 0.3).abs() < 0.03, "lag-1 correlation {c}");
        }
        let (x, y) = (b.column(0), b.column(2));
        let c = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        assert!(c.abs() < 0.03);
    }

    #[test]
    fn multivariate_independent_at_zero_correlation() {
        let m = 10_000;
        let b = simulate_multi_gk(&[0.0, 1.0, 0.0, 0.0, 0.0], m, &mut seeded(8)).unwrap();
        let (x, y) = (b.column(1), b.column(2));
        let c = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        assert!(c.abs() < 0.05);
    }

    #[test]
    fn strong_correlation_is_not_positive_definite() {
        // smallest eigenvalue of the 5x5 tridiagonal matrix is 1 - 2|rho|cos(pi/6)
        for rho in [0.9, -0.9] {
            assert!(1.0 - 2.0 * f64::abs(rho) * (std::f64::consts::PI / 6.0).cos() < 0.0);
            assert!(simulate_multi_gk(&[0.0, 1.0, 0.0, 0.0, rho], 5, &mut seeded(1)).is_err());
        }
        assert!(simulate_multi_gk(&[0.0, 1.0, 0.0, 0.0, 0.55], 5, &mut seeded(1)).is_ok());
    }
}
