//! Sample containers shared by the simulators and the score estimators.

use crate::error::{precondition, Error, Result};

/// An `m x d` matrix of model simulations, stored row-major.
///
/// Each row is one simulated output; columns are output dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBatch {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl SimulationBatch {
    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if cols == 0 {
            return precondition("simulation batch needs at least one column");
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return precondition("simulation batch contains non-finite entries");
        }
        Ok(Self { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, rows.len(), cols)
    }

    /// One-dimensional batch, one value per simulation.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), values.len(), 1)
    }

    /// Number of simulations (rows).
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Output dimension (columns).
    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Stack batches with equal column counts, preserving order.
    pub fn concat(parts: &[SimulationBatch]) -> Result<Self> {
        let cols = match parts.first() {
            Some(p) => p.cols,
            None => return precondition("cannot concatenate zero batches"),
        };
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: p.cols,
                });
            }
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Self { data, rows, cols })
    }

    /// Apply `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_flat(self.data.iter().map(|&v| f(v)).collect(), self.rows, self.cols)
    }
}

/// A single observed data point.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return precondition("observation must have at least one coordinate");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return precondition("observation contains non-finite entries");
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// An ordered set of observations sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let d = match observations.first() {
            Some(o) => o.dim(),
            None => return precondition("dataset must contain at least one observation"),
        };
        if let Some(bad) = observations.iter().find(|o| o.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self { observations })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let obs = rows
            .into_iter()
            .map(Observation::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(obs)
    }

    /// Rows of a simulation batch become observations.
    pub fn from_batch(batch: &SimulationBatch) -> Result<Self> {
        Self::from_rows(batch.rows().map(<[f64]>::to_vec).collect())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.observations[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// The first `n` observations.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::new(self.observations.iter().take(n).cloned().collect())
    }

    /// Split into the first `k` observations and the remainder.
    pub fn split_at(&self, k: usize) -> Result<(Self, Self)> {
        let (a, b) = self.observations.split_at(k);
        Ok((Self::new(a.to_vec())?, Self::new(b.to_vec())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_rejects_nonfinite() {
        assert!(SimulationBatch::from_scalars(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn batch_rows_and_columns() {
        let b = SimulationBatch::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])
            .unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.dim(), 2);
        assert_eq!(b.row(1), &[3.0, 4.0]);
        assert_eq!(b.column(1), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn dataset_requires_shared_dimension() {
        let err = Dataset::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
        assert!(Dataset::new(vec![]).is_err());
    }
}
