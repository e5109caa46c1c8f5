//! Gaussian input noise fitted to a population's genotypes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Diagonal jitter added before factorization.
pub const JITTER: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// Lower-triangular factor of `cov + JITTER * I`, or the square roots of
    /// the diagonal when the full factorization fails.
    factor: Factor,
}

#[derive(Clone, Debug, PartialEq)]
enum Factor {
    Cholesky(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl NoiseModel {
    /// Sample mean and covariance (normalized by the sample count) of `rows`.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Precondition("cannot fit noise to an empty population".into()));
        }
        let dim = rows[0].len();
        let mut mean = DVector::zeros(dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Dimension { expected: dim, actual: r.len() });
            }
            mean += DVector::from_column_slice(r);
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for r in rows {
            let d = DVector::from_column_slice(r) - &mean;
            cov.ger(1.0, &d, &d, 1.0);
        }
        cov /= n as f64;
        Ok(Self::new(mean, cov))
    }

    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let dim = mean.len();
        let jittered = &cov + DMatrix::identity(dim, dim) * JITTER;
        let factor = match jittered.clone().cholesky() {
            Some(c) => Factor::Cholesky(c.l()),
            None => {
                log::debug!("covariance factorization failed, sampling from its diagonal");
                Factor::Diagonal(jittered.diagonal().map(|v| v.max(0.0).sqrt()))
            }
        };
        Self { mean, cov, factor }
    }

    /// Same covariance, different mean.
    pub fn with_mean(&self, mean: DVector<f64>) -> Self {
        Self { mean, cov: self.cov.clone(), factor: self.factor.clone() }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn is_diagonal_fallback(&self) -> bool {
        matches!(self.factor, Factor::Diagonal(_))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let e = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = match &self.factor {
            Factor::Cholesky(l) => &self.mean + l * e,
            Factor::Diagonal(s) => &self.mean + s.component_mul(&e),
        };
        x.iter().copied().collect()
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}
