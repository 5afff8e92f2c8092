//! Sparse-vector regression tasks.
//!
//! Features are drawn from `U[−1, 1]^d`, the true parameter has `s` nonzero
//! entries with magnitudes in `U[0.5, 1]` and random signs, and each label is
//! `σ(⟨θ, x⟩) + w` with scalar noise `w ~ U[−σ_w, σ_w]`. Labels are not
//! clipped. One pool of samples is drawn and split by index range into
//! train, holdout and test sets.

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NormPair;
use crate::linalg::{dot, lp_norm};
use crate::model::{sigmoid, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTaskSpec {
    pub d: usize,
    pub sparsity: usize,
    pub n_train: usize,
    pub n_holdout: usize,
    pub n_test: usize,
    /// Half-width σ_w of the label noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SparseTaskSpec {
    fn default() -> Self {
        SparseTaskSpec { d: 1000, sparsity: 10, n_train: 1000, n_holdout: 500, n_test: 1000, noise: 0.1, seed: 0 }
    }
}

impl SparseTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.sparsity == 0 {
            return Err(Error::argument("dimension and sparsity must be positive"));
        }
        if self.sparsity > self.d {
            return Err(Error::argument(format!("sparsity {} exceeds dimension {}", self.sparsity, self.d)));
        }
        if self.n_train == 0 || self.n_holdout == 0 || self.n_test == 0 {
            return Err(Error::argument("train, holdout and test sizes must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::argument(format!("noise level must be nonnegative, got {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseTask {
    pub theta: DVector<f64>,
    pub train: Dataset,
    pub holdout: Dataset,
    pub test: Dataset,
}

impl SparseTask {
    /// Constraint radius `W_p = 2‖θ‖_p`.
    pub fn radius(&self, p: f64) -> f64 {
        2.0 * lp_norm(self.theta.as_slice(), p)
    }

    /// Indices of the nonzero entries of θ.
    pub fn support(&self) -> Vec<usize> {
        self.theta.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect()
    }
}

/// Draws an `s`-sparse parameter in dimension `d`.
pub fn sparse_parameter<R: Rng>(d: usize, s: usize, rng: &mut R) -> DVector<f64> {
    let mut theta = DVector::zeros(d);
    let mut positions = index::sample(rng, d, s).into_vec();
    positions.sort_unstable();
    for i in positions {
        let m: f64 = rng.random_range(0.5..=1.0);
        theta[i] = if rng.random::<bool>() { m } else { -m };
    }
    theta
}

/// Samples the full task, including the true parameter.
pub fn sample_sparse_task(spec: &SparseTaskSpec) -> Result<SparseTask> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = sparse_parameter(spec.d, spec.sparsity, &mut rng);
    let total = spec.n_train + spec.n_holdout + spec.n_test;
    let d = spec.d;
    let mut features = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    let mut clean = Vec::with_capacity(total);
    for _ in 0..total {
        let start = features.len();
        features.extend((0..d).map(|_| rng.random_range(-1.0..=1.0)));
        let c = sigmoid(dot(theta.as_slice(), &features[start..]));
        let w = if spec.noise > 0.0 { rng.random_range(-spec.noise..=spec.noise) } else { 0.0 };
        clean.push(c);
        labels.push(c + w);
    }
    let pool = Dataset::from_rows(d, features, labels, Some(clean), NormPair::L1LInf)?;
    let a = spec.n_train;
    let b = a + spec.n_holdout;
    let range = |lo: usize, hi: usize| (lo..hi).collect::<Vec<_>>();
    Ok(SparseTask {
        train: pool.subset(&range(0, a))?,
        holdout: pool.subset(&range(a, b))?,
        test: pool.subset(&range(b, total))?,
        theta,
    })
}

/// `(train, holdout, test)` for a sparse-vector task.
pub fn gen_sparse_task(spec: &SparseTaskSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let t = sample_sparse_task(spec)?;
    Ok((t.train, t.holdout, t.test))
}
