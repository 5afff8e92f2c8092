//! Monte-Carlo norms of the empirical second-moment matrix.
//!
//! For standard Gaussian rows, `H = XᵀX / n` has Frobenius norm of order
//! `√d + d/√n` while its operator norm is of order `1 + d/n`. With `n = d`
//! the operator norm stays bounded and the Frobenius norm grows like `√d`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramNorms {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub frobenius: f64,
    pub operator: f64,
}

/// Averages `‖H‖_F` and `‖H‖` over `trials` independent draws.
pub fn gram_norm_diagnostic(n: usize, d: usize, trials: usize, seed: u64) -> Result<GramNorms> {
    if n == 0 || d == 0 || trials == 0 {
        return Err(Error::argument("n, d and trials must be positive"));
    }
    let (mut fro, mut op) = (0.0, 0.0);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64, 0));
        let x = DMatrix::<f64>::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let h = x.tr_mul(&x) / n as f64;
        fro += h.norm();
        let eig = h.symmetric_eigenvalues();
        op += eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let k = trials as f64;
    Ok(GramNorms { n, d, trials, frobenius: fro / k, operator: op / k })
}
