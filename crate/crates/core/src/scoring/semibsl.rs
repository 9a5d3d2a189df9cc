use nalgebra::DMatrix;
use statrs::function::erf::{erfc, erfc_inv};

use crate::data::{Observation, SimulationBatch};
use crate::error::{precondition, Error, Result};

use super::dawid_sebastiani::cholesky_checked;
use super::{check_dims, BandwidthRule};

/// KDE CDF values are clamped to `[CDF_CLAMP, 1 - CDF_CLAMP]` before the
/// normal quantile is taken.
pub const CDF_CLAMP: f64 = 1e-8;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Linear-interpolation quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * m^(-1/5)`.
///
/// Falls back to the standard deviation when the interquartile range is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return precondition("bandwidth rule needs at least 2 samples");
    }
    let mf = m as f64;
    let mean = samples.iter().sum::<f64>() / mf;
    let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (mf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return precondition("bandwidth rule needs a non-constant sample");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * mf.powf(-0.2))
}

/// Gaussian kernel density estimate of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeMarginal {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl KdeMarginal {
    pub fn new(samples: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return precondition("density estimate needs at least one sample");
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return precondition(format!("KDE bandwidth must be positive, got {bandwidth}"));
        }
        Ok(Self { samples, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Log density, computed with log-sum-exp so far tails stay finite.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let mut max = f64::NEG_INFINITY;
        for &s in &self.samples {
            let u = (x - s) / h;
            max = max.max(-0.5 * u * u);
        }
        let sum: f64 = self
            .samples
            .iter()
            .map(|&s| {
                let u = (x - s) / h;
                (-0.5 * u * u - max).exp()
            })
            .sum();
        max + sum.ln() - (self.samples.len() as f64).ln() - h.ln() - LN_SQRT_2PI
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.samples.iter().map(|&s| std_normal_cdf((x - s) / h)).sum::<f64>() / self.samples.len() as f64
    }
}

/// Density and distribution function of a Gaussian KDE at `point`.
pub fn kde_marginal(samples: &[f64], bandwidth: f64, point: f64) -> Result<(f64, f64)> {
    let kde = KdeMarginal::new(samples.to_vec(), bandwidth)?;
    Ok((kde.pdf(point), kde.cdf(point)))
}

/// Normal scores `Phi^-1(r / (m + 1))` for ranks `r = 1..m`, exactly antisymmetric.
fn normal_scores(m: usize) -> Vec<f64> {
    let mut s = vec![0.0; m];
    for r in 1..=m.div_ceil(2) {
        let v = std_normal_quantile(r as f64 / (m + 1) as f64);
        s[r - 1] = v;
        s[m - r] = -v;
    }
    if m % 2 == 1 {
        s[m / 2] = 0.0;
    }
    s
}

/// Rank (0-based) of each entry, ties broken by index.
fn ranks(col: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut rank = vec![0; col.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    (order, rank)
}

/// Gaussian rank correlation matrix of the batch columns.
pub fn grc_correlation(batch: &SimulationBatch) -> Result<DMatrix<f64>> {
    let m = batch.len();
    let d = batch.dim();
    if m < 3 {
        return precondition(format!("rank correlation needs at least 3 simulations, got {m}"));
    }
    let scores = normal_scores(m);
    let denom: f64 = scores.iter().map(|s| s * s).sum();
    let cols: Vec<(Vec<usize>, Vec<usize>)> = (0..d).map(|k| ranks(&batch.column(k))).collect();

    let mut r = DMatrix::identity(d, d);
    for k in 0..d {
        let order_k = &cols[k].0;
        for l in (k + 1)..d {
            let rank_l = &cols[l].1;
            // Walking in rank order of column k makes identical rankings reproduce `denom` exactly.
            let num: f64 = order_k
                .iter()
                .enumerate()
                .map(|(rk, &j)| scores[rk] * scores[rank_l[j]])
                .sum();
            let v = (num / denom).clamp(-1.0, 1.0);
            r[(k, l)] = v;
            r[(l, k)] = v;
        }
    }
    Ok(r)
}

/// KDE marginals joined by a Gaussian copula.
#[derive(Debug, Clone)]
pub struct SemiBslFit {
    correlation: DMatrix<f64>,
    marginals: Vec<KdeMarginal>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl SemiBslFit {
    pub fn fit(batch: &SimulationBatch, rule: BandwidthRule) -> Result<Self> {
        if batch.dim() < 2 {
            return precondition("copula model needs output dimension at least 2");
        }
        let correlation = grc_correlation(batch)?;
        let marginals = (0..batch.dim())
            .map(|k| {
                let col = batch.column(k);
                let h = match rule {
                    BandwidthRule::Silverman => silverman_bandwidth(&col)?,
                    BandwidthRule::Fixed(h) => h,
                };
                KdeMarginal::new(col, h)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(correlation, marginals)
    }

    /// Assemble a fit from an explicit correlation matrix and marginals.
    pub fn from_parts(correlation: DMatrix<f64>, marginals: Vec<KdeMarginal>) -> Result<Self> {
        let d = marginals.len();
        if d < 2 {
            return precondition("copula model needs output dimension at least 2");
        }
        if correlation.nrows() != d || correlation.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: correlation.nrows(),
            });
        }
        for k in 0..d {
            if correlation[(k, k)] != 1.0 {
                return precondition("copula correlation must have a unit diagonal");
            }
            for l in 0..k {
                if correlation[(k, l)] != correlation[(l, k)] || correlation[(k, l)].abs() > 1.0 {
                    return precondition("copula correlation must be symmetric with entries in [-1, 1]");
                }
            }
        }
        let chol = cholesky_checked(&correlation).ok_or(Error::DegenerateCopula)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            correlation,
            marginals,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn marginals(&self) -> &[KdeMarginal] {
        &self.marginals
    }

    /// Negative log semi-parametric likelihood of `y`.
    pub fn score(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        let mut neg_log_marg = 0.0;
        let mut eta = nalgebra::DVector::zeros(y.len());
        for (k, (kde, &v)) in self.marginals.iter().zip(y).enumerate() {
            neg_log_marg -= kde.log_pdf(v);
            eta[k] = std_normal_quantile(kde.cdf(v).clamp(CDF_CLAMP, 1.0 - CDF_CLAMP));
        }
        let z = self
            .chol
            .solve_lower_triangular(&eta)
            .expect("factor has a positive diagonal");
        let quad = z.norm_squared() - eta.norm_squared();
        Ok(neg_log_marg + 0.5 * self.log_det + 0.5 * quad)
    }
}

/// semiBSL negative log likelihood of `y` under a fit to the batch.
pub fn semibsl_score_estimate(batch: &SimulationBatch, y: &Observation) -> Result<f64> {
    check_dims(batch, y.values())?;
    SemiBslFit::fit(batch, BandwidthRule::Silverman)?.score(y.values())
}
