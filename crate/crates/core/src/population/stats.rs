use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Matrix;

/// A Monte-Carlo mean with its standard error. For vector and matrix values
/// `stderr` is the largest entrywise standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate<T> {
    pub value: T,
    pub stderr: f64,
    pub n: usize,
}

/// Entrywise running mean and variance (Welford), summed in push order.
#[derive(Clone, Debug)]
pub struct RunningStats {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        RunningStats {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    #[inline]
    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.mean.len());
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((mu, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(v) {
            let delta = x - *mu;
            *mu += delta * inv;
            *m2 += delta * (x - *mu);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard error of each entry's mean: sample std / √n.
    pub fn stderr(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![f64::INFINITY; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|m2| (m2.max(0.0) / (n - 1.0) / n).sqrt())
            .collect()
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr().into_iter().fold(0.0, f64::max)
    }

    /// `√(Σ_i se_i²)`: the standard error scale of the Euclidean norm of the mean.
    pub fn combined_stderr(&self) -> f64 {
        self.stderr().iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn scalar(&self) -> McEstimate<f64> {
        McEstimate {
            value: self.mean[0],
            stderr: self.stderr()[0],
            n: self.n,
        }
    }

    pub fn vector(&self) -> McEstimate<Vec<f64>> {
        McEstimate {
            value: self.mean.clone(),
            stderr: self.max_stderr(),
            n: self.n,
        }
    }

    pub fn matrix(&self, rows: usize, cols: usize) -> Result<McEstimate<Matrix>> {
        Ok(McEstimate {
            value: Matrix::from_vec(rows, cols, self.mean.clone())?,
            stderr: self.max_stderr(),
            n: self.n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass_formulas() {
        let xs = [1.0, 4.0, -2.0, 7.5, 0.25];
        let mut s = RunningStats::new(1);
        for x in xs {
            s.push(&[x]);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let e = s.scalar();
        assert!((e.value - mean).abs() < 1e-14);
        assert!((e.stderr - (var / n).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn constant_input_has_zero_stderr() {
        let mut s = RunningStats::new(2);
        for _ in 0..10 {
            s.push(&[3.0, -1.0]);
        }
        assert_eq!(s.stderr(), vec![0.0, 0.0]);
        assert_eq!(s.mean(), &[3.0, -1.0]);
    }
}
