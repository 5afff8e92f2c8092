//! Flat key-value experiment configuration.
//!
//! The same keys are accepted in a TOML file and as command-line flags; flags
//! override file values, and unknown keys are rejected.
//!
//! ```toml
//! d = 2000
//! sparsity = 20
//! n_train = 500
//! lambdas = [1.0, 0.5, 0.1]
//! algorithms = ["glmtron", "hypentropy"]
//! iterations = 1500
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::data::SparseTaskSpec;
use crate::harness::sweep::{Algorithm, LowRankOptions, SweepGrid};
use crate::matrixglm::SystemSpec;
use crate::model::XiMode;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: Option<usize>,
    pub sparsity: Option<usize>,
    pub rank: Option<usize>,
    pub n_train: Option<usize>,
    pub n_holdout: Option<usize>,
    pub n_test: Option<usize>,
    /// Training sizes swept by the experiment suites.
    pub n_values: Option<Vec<usize>>,
    pub noise: Option<f64>,
    pub rho: Option<f64>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub lambdas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub ps: Option<Vec<f64>>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub trials: Option<usize>,
    pub iterations: Option<usize>,
    pub project: Option<bool>,
    pub xi: Option<XiMode>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay!(self, top; d, sparsity, rank, n_train, n_holdout, n_test, n_values, noise, rho, horizon, seed,
            lambdas, betas, ps, algorithms, trials, iterations, project, xi, output, summary);
        self
    }

    pub fn sparse_task(&self) -> Result<SparseTaskSpec> {
        let base = SparseTaskSpec::default();
        let spec = SparseTaskSpec {
            d: self.d.unwrap_or(base.d),
            sparsity: self.sparsity.unwrap_or(base.sparsity),
            n_train: self.n_train.unwrap_or(base.n_train),
            n_holdout: self.n_holdout.unwrap_or(base.n_holdout),
            n_test: self.n_test.unwrap_or(base.n_test),
            noise: self.noise.unwrap_or(base.noise),
            seed: self.seed.unwrap_or(base.seed),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Overlays the configured grid fields on `base`.
    pub fn sweep_grid(&self, base: SweepGrid) -> Result<SweepGrid> {
        let grid = SweepGrid {
            lambdas: self.lambdas.clone().unwrap_or(base.lambdas),
            betas: self.betas.clone().unwrap_or(base.betas),
            ps: self.ps.clone().unwrap_or(base.ps),
            algorithms: self.algorithms.clone().unwrap_or(base.algorithms),
            trials: self.trials.unwrap_or(base.trials),
            iterations: self.iterations.unwrap_or(base.iterations),
            project: self.project.unwrap_or(base.project),
            xi: self.xi.unwrap_or(base.xi),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Random low-rank system; defaults `d = 200, r = 4, ρ = 0.9, σ_w = 0.1, T = 5`.
    pub fn system_spec(&self) -> Result<SystemSpec> {
        SystemSpec::random(
            self.d.unwrap_or(200),
            self.rank.unwrap_or(4),
            self.rho.unwrap_or(0.9),
            self.noise.unwrap_or(0.1),
            self.horizon.unwrap_or(5),
            self.seed.unwrap_or(0),
        )
    }

    /// Trajectory counts; defaults 200 train, 100 holdout, 200 test.
    pub fn lowrank_options(&self) -> LowRankOptions {
        let base = LowRankOptions::default();
        LowRankOptions {
            n_train: self.n_train.unwrap_or(base.n_train),
            n_holdout: self.n_holdout.unwrap_or(base.n_holdout),
            n_test: self.n_test.unwrap_or(base.n_test),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}
