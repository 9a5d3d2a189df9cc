use crate::data::{Observation, SimulationBatch};
use crate::error::{precondition, Result};

use super::{check_dims, require_pairs};

/// `|v|^beta` given the squared Euclidean norm.
#[inline]
pub(crate) fn norm_power(sq: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        sq.sqrt()
    } else if beta == 2.0 {
        sq
    } else {
        sq.powf(0.5 * beta)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 2.0) {
        return precondition(format!("energy exponent must lie in (0, 2], got {beta}"));
    }
    Ok(())
}

/// `(1/m) sum_j |x_j - y|^beta`.
pub(crate) fn mean_distance_power(batch: &SimulationBatch, y: &[f64], beta: f64) -> f64 {
    let m = batch.len() as f64;
    batch.rows().map(|x| norm_power(sq_dist(x, y), beta)).sum::<f64>() / m
}

/// Mean of `|x_j - x_k|^beta` over ordered pairs `j != k`.
pub fn energy_pair_mean(batch: &SimulationBatch, beta: f64) -> Result<f64> {
    require_pairs(batch)?;
    check_beta(beta)?;
    let m = batch.len();
    let norm = (m * (m - 1)) as f64;

    // In one dimension with beta = 1 the pair sum has a closed form on sorted data.
    if batch.dim() == 1 && beta == 1.0 {
        let mut xs = batch.as_flat().to_vec();
        xs.sort_by(f64::total_cmp);
        let mf = m as f64;
        let s: f64 = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - mf - 1.0) * x)
            .sum();
        return Ok(2.0 * s / norm);
    }

    let mut s = 0.0;
    for j in 0..m {
        let xj = batch.row(j);
        for k in (j + 1)..m {
            s += norm_power(sq_dist(xj, batch.row(k)), beta);
        }
    }
    Ok(2.0 * s / norm)
}

/// Unbiased estimate of the energy score of the simulator at `y`.
pub fn energy_score_estimate(batch: &SimulationBatch, y: &Observation, beta: f64) -> Result<f64> {
    check_dims(batch, y.values())?;
    let pair = energy_pair_mean(batch, beta)?;
    Ok(2.0 * mean_distance_power(batch, y.values(), beta) - pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_pairs(batch: &SimulationBatch, beta: f64) -> f64 {
        let m = batch.len();
        let mut s = 0.0;
        for j in 0..m {
            for k in 0..m {
                if j != k {
                    s += sq_dist(batch.row(j), batch.row(k)).powf(beta / 2.0);
                }
            }
        }
        s / (m * (m - 1)) as f64
    }

    #[test]
    fn hand_examples() {
        let b = SimulationBatch::from_scalars(&[0.0, 1.0]).unwrap();
        assert_eq!(energy_score_estimate(&b, &Observation::scalar(3.0), 1.0).unwrap(), 4.0);
        let b = SimulationBatch::from_scalars(&[0.0, 2.0]).unwrap();
        assert_eq!(energy_score_estimate(&b, &Observation::scalar(1.0), 2.0).unwrap(), -2.0);
        let b = SimulationBatch::from_rows(&vec![vec![1.0, 2.0]; 3]).unwrap();
        let y = Observation::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(energy_score_estimate(&b, &y, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn needs_two_simulations() {
        let b = SimulationBatch::from_scalars(&[0.0]).unwrap();
        assert!(energy_score_estimate(&b, &Observation::scalar(0.0), 1.0).is_err());
    }

    #[test]
    fn rejects_bad_beta() {
        let b = SimulationBatch::from_scalars(&[0.0, 1.0]).unwrap();
        assert!(energy_score_estimate(&b, &Observation::scalar(0.0), 0.0).is_err());
        assert!(energy_score_estimate(&b, &Observation::scalar(0.0), 2.5).is_err());
    }

    proptest! {
        #[test]
        fn sorted_fast_path_matches_brute_force(xs in prop::collection::vec(-50.0f64..50.0, 2..40)) {
            let b = SimulationBatch::from_scalars(&xs).unwrap();
            let fast = energy_pair_mean(&b, 1.0).unwrap();
            let slow = brute_pairs(&b, 1.0);
            prop_assert!((fast - slow).abs() <= 1e-9 * (1.0 + slow.abs()));
        }

        #[test]
        fn multivariate_pairs_match_brute_force(
            xs in prop::collection::vec(-5.0f64..5.0, 6..30),
            beta in 0.1f64..2.0,
        ) {
            let rows = xs.len() / 3;
            let b = SimulationBatch::from_flat(xs[..rows * 3].to_vec(), rows, 3).unwrap();
            let fast = energy_pair_mean(&b, beta).unwrap();
            prop_assert!((fast - brute_pairs(&b, beta)).abs() <= 1e-9 * (1.0 + fast.abs()));
        }

        #[test]
        fn affine_equivariance(
            xs in prop::collection::vec(-10.0f64..10.0, 2..20),
            y in -10.0f64..10.0,
            a in -4.0f64..4.0,
            shift in -10.0f64..10.0,
        ) {
            prop_assume!(a.abs() > 1e-3);
            let b = SimulationBatch::from_scalars(&xs).unwrap();
            let bt = b.map(|v| a * v + shift).unwrap();
            let s = energy_score_estimate(&b, &Observation::scalar(y), 1.0).unwrap();
            let st = energy_score_estimate(&bt, &Observation::scalar(a * y + shift), 1.0).unwrap();
            prop_assert!((st - a.abs() * s).abs() <= 1e-9 * (1.0 + st.abs()));
        }
    }
}
