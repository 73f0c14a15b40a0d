//! Per-class Gaussian fit over feature vectors and the resulting mixture
//! density: one full-covariance component per class with empirical means,
//! unbiased covariances, and class-frequency priors, fitted in a single pass.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::linalg::{cholesky, CholeskyFactor, Matrix};
use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdaError {
    /// Class `c` has fewer than two samples, so its covariance is undefined.
    ClassUnderpopulated(usize),
    ShapeMismatch,
    /// No jitter value on the ladder made every class covariance factorizable.
    JitterExhausted,
}

impl fmt::Display for GdaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GdaError::ClassUnderpopulated(c) => {
                write!(f, "class {c} has fewer than two samples")
            }
            GdaError::ShapeMismatch => write!(f, "feature dimension mismatch"),
            GdaError::JitterExhausted => write!(f, "jitter ladder exhausted"),
        }
    }
}

impl core::error::Error for GdaError {}

/// One fitted class component.
#[derive(Debug, Clone)]
pub struct GdaClass {
    pub mean: Vec<f64>,
    pub cov_chol: CholeskyFactor,
    pub log_prior: f64,
}

/// Gaussian class-conditional density model over feature space.
#[derive(Debug, Clone)]
pub struct GdaModel {
    pub classes: Vec<GdaClass>,
    pub dim: usize,
    pub jitter_used: f64,
}

/// Streaming sufficient statistics for [`GdaModel`]: per-class counts, sums,
/// and sums of outer products. Chunks can be accumulated or merged and the
/// finalized model is identical (to rounding) to a one-pass fit.
#[derive(Debug, Clone)]
pub struct GdaStats {
    num_classes: usize,
    dim: usize,
    counts: Vec<usize>,
    sums: Vec<Vec<f64>>,
    /// Row-major d x d accumulators of sum(x x^T) per class.
    outer: Vec<Vec<f64>>,
}

impl GdaStats {
    pub fn new(num_classes: usize, dim: usize) -> GdaStats {
        GdaStats {
            num_classes,
            dim,
            counts: vec![0; num_classes],
            sums: vec![vec![0.0; dim]; num_classes],
            outer: vec![vec![0.0; dim * dim]; num_classes],
        }
    }

    pub fn update(&mut self, features: &Matrix, labels: &[usize]) -> Result<(), GdaError> {
        if features.cols() != self.dim || features.rows() != labels.len() {
            return Err(GdaError::ShapeMismatch);
        }
        for (i, &c) in labels.iter().enumerate() {
            assert!(c < self.num_classes, "label {c} out of range");
            let row = features.row(i);
            self.counts[c] += 1;
            for (s, &v) in self.sums[c].iter_mut().zip(row) {
                *s += v;
            }
            let o = &mut self.outer[c];
            for a in 0..self.dim {
                let ra = row[a];
                let base = a * self.dim;
                for (b, &rb) in row.iter().enumerate() {
                    o[base + b] += ra * rb;
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &GdaStats) {
        assert_eq!(self.num_classes, other.num_classes);
        assert_eq!(self.dim, other.dim);
        for c in 0..self.num_classes {
            self.counts[c] += other.counts[c];
            for (a, &b) in self.sums[c].iter_mut().zip(&other.sums[c]) {
                *a += b;
            }
            for (a, &b) in self.outer[c].iter_mut().zip(&other.outer[c]) {
                *a += b;
            }
        }
    }

    /// Per-class mean and unbiased covariance (divisor n_c - 1) with the
    /// smallest jitter from the ladder {1e-10 * 10^k} that makes every class
    /// covariance factorizable; the jitter is shared across classes so the
    /// densities stay comparable.
    pub fn finalize(&self) -> Result<GdaModel, GdaError> {
        let total: usize = self.counts.iter().sum();
        let mut means = Vec::with_capacity(self.num_classes);
        let mut covs = Vec::with_capacity(self.num_classes);
        for c in 0..self.num_classes {
            let n = self.counts[c];
            if n < 2 {
                return Err(GdaError::ClassUnderpopulated(c));
            }
            let nf = n as f64;
            let mean: Vec<f64> = self.sums[c].iter().map(|&s| s / nf).collect();
            let mut cov = Matrix::zeros(self.dim, self.dim);
            for a in 0..self.dim {
                for b in 0..self.dim {
                    let raw = self.outer[c][a * self.dim + b] - nf * mean[a] * mean[b];
                    cov.set(a, b, raw / (nf - 1.0));
                }
            }
            // Symmetrize away accumulation rounding.
            for a in 0..self.dim {
                for b in 0..a {
                    let v = 0.5 * (cov.get(a, b) + cov.get(b, a));
                    cov.set(a, b, v);
                    cov.set(b, a, v);
                }
            }
            means.push(mean);
            covs.push(cov);
        }

        let mut jitter = 1e-10;
        'ladder: for _ in 0..40 {
            let mut factors = Vec::with_capacity(self.num_classes);
            for cov in &covs {
                let mut m = cov.clone();
                m.add_scaled_identity(jitter);
                match cholesky(&m) {
                    Ok(f) => factors.push(f),
                    Err(_) => {
                        jitter *= 10.0;
                        continue 'ladder;
                    }
                }
            }
            let classes = means
                .into_iter()
                .zip(factors)
                .zip(&self.counts)
                .map(|((mean, cov_chol), &n)| GdaClass {
                    mean,
                    cov_chol,
                    log_prior: fmath::ln(n as f64 / total as f64),
                })
                .collect();
            return Ok(GdaModel {
                classes,
                dim: self.dim,
                jitter_used: jitter,
            });
        }
        Err(GdaError::JitterExhausted)
    }
}

/// Gaussian log-density `log N(z; mean, L L^T)` evaluated through the
/// Cholesky factor.
pub fn gaussian_log_pdf(mean: &[f64], chol: &CholeskyFactor, z: &[f64]) -> f64 {
    let d = mean.len();
    debug_assert_eq!(z.len(), d);
    let r: Vec<f64> = z.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let maha = chol.mahalanobis_sq(&r);
    -0.5 * (d as f64 * fmath::ln(2.0 * core::f64::consts::PI) + chol.log_det() + maha)
}

/// Fit from a feature matrix and labels in one pass.
pub fn fit(features: &Matrix, labels: &[usize], num_classes: usize) -> Result<GdaModel, GdaError> {
    let mut stats = GdaStats::new(num_classes, features.cols());
    stats.update(features, labels)?;
    stats.finalize()
}

impl GdaModel {
    #[inline]
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-class joint scores `log pi_c + log N(z; mu_c, Sigma_c)`.
    pub fn class_log_joint(&self, z: &[f64]) -> Result<Vec<f64>, GdaError> {
        if z.len() != self.dim {
            return Err(GdaError::ShapeMismatch);
        }
        Ok(self
            .classes
            .iter()
            .map(|c| c.log_prior + gaussian_log_pdf(&c.mean, &c.cov_chol, z))
            .collect())
    }

    /// Log marginal feature density `log q(z) = LSE_c [log pi_c + log N_c(z)]`.
    pub fn log_density(&self, z: &[f64]) -> Result<f64, GdaError> {
        let terms = self.class_log_joint(z)?;
        Ok(log_sum_exp(&terms).expect("at least one class"))
    }

    /// Log density for every row of a feature matrix.
    pub fn log_density_batch(&self, features: &Matrix) -> Result<Vec<f64>, GdaError> {
        (0..features.rows())
            .map(|i| self.log_density(features.row(i)))
            .collect()
    }

    /// Generative class posterior: softmax over the per-class joint scores.
    pub fn class_posterior(&self, z: &[f64]) -> Result<Vec<f64>, GdaError> {
        let terms = self.class_log_joint(z)?;
        let lse = log_sum_exp(&terms).expect("at least one class");
        Ok(terms.iter().map(|&t| fmath::exp(t - lse)).collect())
    }
}
