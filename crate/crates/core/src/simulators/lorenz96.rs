use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SimulationBatch;
use crate::error::{precondition, Error, Result};
use crate::rng::SimRng;

use super::{simulate_via_summaries, PriorSpec, Simulator};

pub const LORENZ_SITES: usize = 8;
pub const LORENZ_DT: f64 = 1.0 / 30.0;
/// Steps covering `t` in `[0, 1.5]`.
pub const LORENZ_STEPS: usize = 45;
const FORCING: f64 = 10.0;

/// Starting state shared by every simulation: eight U(-2, 10) draws from
/// numpy's `default_rng(96)`, rounded to six decimals.
pub const LORENZ_INITIAL_STATE: [f64; LORENZ_SITES] =
    [6.750028, 6.806675, 4.579553, 3.877583, 4.382677, 6.218881, -0.887679, 9.535114];

/// Number of summary statistics.
pub const LORENZ_STATS: usize = 6;

fn drift(y: &[f64], forcing: &[f64], b0: f64, b1: f64, out: &mut [f64]) {
    let k = y.len();
    for i in 0..k {
        let ym1 = y[(i + k - 1) % k];
        let ym2 = y[(i + k - 2) % k];
        let yp1 = y[(i + 1) % k];
        out[i] = -ym1 * (ym2 - yp1) - y[i] + FORCING - (b0 + b1 * y[i] + forcing[i]);
    }
}

/// Integrate the stochastically forced system with RK4.
///
/// `theta = (b0, b1, sigma_e, phi)`. The AR(1) forcing starts from its
/// stationary law and is refreshed once per step, staying fixed across the
/// four stages. Returns the state after each step, one vector per step.
pub fn integrate_lorenz96(
    theta: &[f64],
    initial: &[f64],
    dt: f64,
    steps: usize,
    rng: &mut SimRng,
) -> Result<Vec<Vec<f64>>> {
    let (b0, b1, sigma, phi) = (theta[0], theta[1], theta[2], theta[3]);
    if !(sigma >= 0.0 && phi.abs() <= 1.0) {
        return precondition(format!("forcing needs sigma_e >= 0 and |phi| <= 1, got ({sigma}, {phi})"));
    }
    let k = initial.len();
    if k < 4 {
        return precondition("cyclic system needs at least 4 sites");
    }
    let innov = sigma * (1.0 - phi * phi).sqrt();
    let mut r: Vec<f64> = (0..k).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut y = initial.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut path = Vec::with_capacity(steps);
    for step in 0..steps {
        drift(&y, &r, b0, b1, &mut k1);
        for i in 0..k {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        drift(&tmp, &r, b0, b1, &mut k2);
        for i in 0..k {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        drift(&tmp, &r, b0, b1, &mut k3);
        for i in 0..k {
            tmp[i] = y[i] + dt * k3[i];
        }
        drift(&tmp, &r, b0, b1, &mut k4);
        for i in 0..k {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation(format!("state diverged at step {}", step + 1)));
        }
        for ri in r.iter_mut() {
            *ri = phi * *ri + innov * rng.sample::<f64, _>(StandardNormal);
        }
        path.push(y.clone());
    }
    Ok(path)
}

/// One raw series, channel-major: entry `k * T + t` is site `k` at step `t`.
fn raw_series(theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
    let path = integrate_lorenz96(theta, &LORENZ_INITIAL_STATE, LORENZ_DT, LORENZ_STEPS, rng)?;
    let mut out = vec![0.0; LORENZ_SITES * LORENZ_STEPS];
    for (t, state) in path.iter().enumerate() {
        for (k, v) in state.iter().enumerate() {
            out[k * LORENZ_STEPS + t] = *v;
        }
    }
    Ok(out)
}

/// `m` raw series at `theta = (b0, b1, sigma_e, phi)`.
pub fn simulate_lorenz96(theta: &[f64], m: usize, rng: &mut SimRng) -> Result<Vec<Vec<f64>>> {
    (0..m).map(|_| raw_series(theta, rng)).collect()
}

/// Site-averaged temporal moments of a channel-major `sites x steps` series:
/// mean, variance, lag-1 autocovariance, covariance with the neighbouring
/// site, and lag-1 cross-covariances with the left and right neighbours.
pub fn lorenz96_statistics(series: &[f64], sites: usize) -> Result<Vec<f64>> {
    if sites == 0 || series.len() % sites != 0 {
        return precondition("series length must be a multiple of the site count");
    }
    let t_len = series.len() / sites;
    if t_len < 3 {
        return precondition("statistics need at least 3 time steps");
    }
    let tf = t_len as f64;
    let site = |k: usize| &series[k * t_len..(k + 1) * t_len];
    let means: Vec<f64> = (0..sites).map(|k| site(k).iter().sum::<f64>() / tf).collect();
    // centred copy
    let c: Vec<Vec<f64>> = (0..sites).map(|k| site(k).iter().map(|v| v - means[k]).collect()).collect();

    let cov = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / tf;
    // sum_t a(t + 1) b(t) / (T - 1)
    let lag = |a: &[f64], b: &[f64]| {
        a[1..].iter().zip(&b[..t_len - 1]).map(|(x, y)| x * y).sum::<f64>() / (tf - 1.0)
    };

    let mut s = [0.0; LORENZ_STATS];
    for k in 0..sites {
        let left = &c[(k + sites - 1) % sites];
        let right = &c[(k + 1) % sites];
        let own = &c[k];
        s[0] += means[k];
        s[1] += cov(own, own);
        s[2] += lag(own, own);
        s[3] += cov(own, right);
        s[4] += lag(own, left);
        s[5] += lag(own, right);
    }
    Ok(s.iter().map(|v| v / sites as f64).collect())
}

/// Stochastically forced Lorenz96 with summary-statistic outputs.
#[derive(Debug, Clone)]
pub struct Lorenz96 {
    prior: PriorSpec,
}

impl Lorenz96 {
    pub fn new() -> Self {
        Self {
            prior: PriorSpec::uniform_box(&[(1.4, 2.2), (0.0, 1.0), (1.5, 2.5), (0.0, 1.0)]).expect("valid bounds"),
        }
    }
}

impl Default for Lorenz96 {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for Lorenz96 {
    fn name(&self) -> &'static str {
        "lorenz96"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["b0", "b1", "sigma_e", "phi"]
    }

    fn output_dim(&self) -> usize {
        LORENZ_STATS
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_via_summaries(self, theta, m, rng)
    }

    fn raw_shape(&self) -> Option<(usize, usize)> {
        Some((LORENZ_SITES, LORENZ_STEPS))
    }

    fn simulate_raw(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        raw_series(theta, rng)
    }

    fn summarize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        lorenz96_statistics(raw, LORENZ_SITES)
    }
}
