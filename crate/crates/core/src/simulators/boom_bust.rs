use rand_distr::{Binomial, Distribution, Poisson};

use crate::data::SimulationBatch;
use crate::error::{precondition, Error, Result};
use crate::rng::SimRng;

use super::{simulate_via_summaries, PriorSpec, Simulator};

/// Retained series length.
pub const BOOM_BUST_LEN: usize = 250;
/// Steps simulated and dropped before the retained series.
pub const BOOM_BUST_BURN_IN: usize = 50;
const BOOM_BUST_STATS: usize = 12;

fn poisson(lambda: f64, rng: &mut SimRng) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(lambda).map_err(|e| Error::Simulation(format!("poisson rate {lambda}: {e}")))?;
    Ok(p.sample(rng) as u64)
}

/// One population series at `theta = (growth, capacity, survival, immigration)`.
///
/// Below the capacity the population grows as a Poisson draw, above it a
/// binomial thinning applies; immigration adds an independent Poisson count.
pub fn simulate_boom_bust_series(theta: &[f64], n0: u64, rng: &mut SimRng) -> Result<Vec<f64>> {
    let (r, kappa, alpha, beta) = (theta[0], theta[1], theta[2], theta[3]);
    if !(r >= -1.0 && (0.0..=1.0).contains(&alpha) && beta >= 0.0 && kappa.is_finite()) {
        return precondition(format!("invalid population parameters {theta:?}"));
    }
    let total = BOOM_BUST_BURN_IN + BOOM_BUST_LEN;
    let mut n = n0;
    let mut out = Vec::with_capacity(BOOM_BUST_LEN);
    for t in 0..total {
        let next = if n as f64 <= kappa {
            poisson(n as f64 * (1.0 + r), rng)?
        } else {
            Binomial::new(n, alpha)
                .map_err(|e| Error::Simulation(e.to_string()))?
                .sample(rng)
        };
        n = next + poisson(beta, rng)?;
        if t >= BOOM_BUST_BURN_IN {
            out.push(n as f64);
        }
    }
    Ok(out)
}

fn initial_population(kappa: f64) -> u64 {
    (kappa / 2.0).round().max(0.0) as u64
}

/// `m` raw series, each of length 250.
pub fn simulate_boom_bust(theta: &[f64], m: usize, rng: &mut SimRng) -> Result<Vec<Vec<f64>>> {
    let n0 = initial_population(theta[1]);
    (0..m).map(|_| simulate_boom_bust_series(theta, n0, rng)).collect()
}

/// Mean, population variance, skewness and excess kurtosis.
/// Degenerate inputs give zeros for the undefined moments.
fn moments(xs: &[f64]) -> [f64; 4] {
    if xs.is_empty() {
        return [0.0; 4];
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 == 0.0 {
        return [mean, 0.0, 0.0, 0.0];
    }
    [mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0]
}

/// Moments of the levels, of the first differences, and of the one-step
/// ratios (steps from an empty population are skipped).
pub fn boom_bust_statistics(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 4 {
        return precondition("series needs at least 4 values");
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = series
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let mut out = Vec::with_capacity(BOOM_BUST_STATS);
    out.extend(moments(series));
    out.extend(moments(&diffs));
    out.extend(moments(&ratios));
    Ok(out)
}

/// Boom/bust population model with twelve moment statistics as output.
#[derive(Debug, Clone)]
pub struct BoomBust {
    prior: PriorSpec,
}

impl BoomBust {
    pub fn new() -> Self {
        Self {
            prior: PriorSpec::uniform_box(&[(0.0, 1.0), (10.0, 80.0), (0.0, 1.0), (0.0, 1.0)]).expect("valid bounds"),
        }
    }
}

impl Default for BoomBust {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator for BoomBust {
    fn name(&self) -> &'static str {
        "boom-bust"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["r", "kappa", "alpha", "beta"]
    }

    fn output_dim(&self) -> usize {
        BOOM_BUST_STATS
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], m: usize, rng: &mut SimRng) -> Result<SimulationBatch> {
        self.check_theta(theta)?;
        simulate_via_summaries(self, theta, m, rng)
    }

    fn raw_shape(&self) -> Option<(usize, usize)> {
        Some((1, BOOM_BUST_LEN))
    }

    fn simulate_raw(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        simulate_boom_bust_series(theta, initial_population(theta[1]), rng)
    }

    fn summarize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        boom_bust_statistics(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn empty_population_stays_empty() {
        let s = simulate_boom_bust_series(&[0.0, 50.0, 0.5, 0.0], 0, &mut seeded(1)).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_survival_collapses() {
        // capacity 0 means any positive population is culled by a Binomial(n, 0)
        let s = simulate_boom_bust_series(&[0.5, 0.0, 0.0, 0.0], 40, &mut seeded(2)).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_series_statistics() {
        let s = boom_bust_statistics(&[7.0; 20]).unwrap();
        assert_eq!(s, vec![7.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn arithmetic_series_has_constant_differences() {
        let xs: Vec<f64> = (0..30).map(|i| 5.0 + 3.0 * i as f64).collect();
        let s = boom_bust_statistics(&xs).unwrap();
        assert_eq!(&s[4..8], &[3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_levels_drop_ratios() {
        let s = boom_bust_statistics(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(&s[8..], &[0.0; 4]);
        let s = boom_bust_statistics(&[0.0, 4.0, 2.0, 4.0]).unwrap();
        // ratios 0.5 and 2.0
        assert_eq!(s[8], 1.25);
    }

    #[test]
    fn reference_parameters_give_booms_and_busts() {
        let theta = [0.4, 50.0, 0.09, 0.05];
        let raw = simulate_boom_bust(&theta, 200, &mut seeded(3)).unwrap();
        let mean = raw.iter().flatten().sum::<f64>() / (200.0 * 250.0);
        // population oscillates below and above the capacity
        assert!(mean > 5.0 && mean < 60.0, "mean {mean}");
        assert!(raw.iter().all(|s| s.iter().any(|&v| v > 50.0) && s.iter().any(|&v| v < 20.0)));
    }

    fn brute_moments(xs: &[f64]) -> [f64; 4] {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
        let v = c(2);
        if v == 0.0 {
            return [mean, 0.0, 0.0, 0.0];
        }
        [mean, v, c(3) / v.powf(1.5), c(4) / (v * v) - 3.0]
    }

    proptest! {
        #[test]
        fn statistics_match_textbook_formulas(xs in prop::collection::vec(0u32..200, 4..80)) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let s = boom_bust_statistics(&xs).unwrap();
            let d: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let r: Vec<f64> = xs.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
            let mut e = brute_moments(&xs).to_vec();
            e.extend(brute_moments(&d));
            e.extend(if r.is_empty() { [0.0; 4] } else { brute_moments(&r) });
            for (a, b) in s.iter().zip(&e) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{} vs {}", a, b);
            }
        }
    }
}
