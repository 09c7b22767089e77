//! Epistemic / aleatoric covariance of a set of probability samples.
//!
//! For samples `p_1..p_n` with mean `p̄`:
//!
//! * epistemic: `(1/n) Σ (p_m − p̄)(p_m − p̄)ᵀ`
//! * aleatoric: `(1/n) Σ diag(p_m) − p_m p_mᵀ`
//!
//! Their sum is the covariance of the mixture, `(1/n) Σ diag(p_m) − p̄ p̄ᵀ`.

use crate::error::{Error, Result};
use crate::model::PROB_SUM_TOLERANCE;

/// `n × d` matrix of probability rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidProbs("sample matrix needs at least one row".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidProbs("sample rows are empty".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::InvalidProbs(format!(
                    "ragged sample matrix: row of length {} (expected {dim})",
                    row.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidProbs(format!("sample entry {p} outside [0, 1]")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n: rows.len(),
            dim,
            data,
        })
    }

    /// Rows must additionally be categorical distributions.
    pub fn new_categorical(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Self::new(rows)?;
        for row in m.rows() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(Error::InvalidProbs(format!("sample row sums to {s}")));
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let n = self.n as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        mean
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    fn scale(mut self, s: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= s);
        self
    }
}

impl std::ops::Add for &SquareMatrix {
    type Output = SquareMatrix;

    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Spread of the samples around their mean.
pub fn epistemic_cov(samples: &SampleMatrix) -> SquareMatrix {
    let mean = samples.mean();
    let d = samples.dim();
    let mut cov = SquareMatrix::zeros(d);
    for row in samples.rows() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..d {
                cov.add_at(i, j, di * (row[j] - mean[j]));
            }
        }
    }
    cov.scale(1.0 / samples.n_rows() as f64)
}

/// Mean categorical covariance of the individual samples.
pub fn aleatoric_cov(samples: &SampleMatrix) -> SquareMatrix {
    let d = samples.dim();
    let mut cov = SquareMatrix::zeros(d);
    for row in samples.rows() {
        for i in 0..d {
            cov.add_at(i, i, row[i]);
            for j in 0..d {
                cov.add_at(i, j, -row[i] * row[j]);
            }
        }
    }
    cov.scale(1.0 / samples.n_rows() as f64)
}

/// `epistemic_cov + aleatoric_cov`.
pub fn total_cov(samples: &SampleMatrix) -> SquareMatrix {
    &epistemic_cov(samples) + &aleatoric_cov(samples)
}

/// Mixture covariance evaluated directly: `(1/n) Σ diag(p_m) − p̄ p̄ᵀ`.
pub fn mixture_cov(samples: &SampleMatrix) -> SquareMatrix {
    let mean = samples.mean();
    let d = samples.dim();
    let mut cov = SquareMatrix::zeros(d);
    for i in 0..d {
        cov.add_at(i, i, mean[i]);
        for j in 0..d {
            cov.add_at(i, j, -mean[i] * mean[j]);
        }
    }
    cov
}

/// Per-pixel (one-dimensional) specialization: `(epistemic, aleatoric)` for
/// Bernoulli samples.
pub fn bernoulli_decomposition(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let epistemic = samples.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    let aleatoric = samples.iter().map(|p| p * (1.0 - p)).sum::<f64>() / n;
    (epistemic, aleatoric)
}
