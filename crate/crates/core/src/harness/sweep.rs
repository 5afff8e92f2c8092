//! Hyperparameter sweeps for the sparse-vector and low-rank experiments.
//!
//! A sweep enumerates *cells* `(algorithm, λ, β or p)` in a fixed order and
//! runs each cell once per trial. Trial `k` draws its data from
//! `derive_seed(seed, k, DATA_STREAM)`, so every cell of a trial sees the same
//! data and any single `(trial, cell)` can be rerun on its own.
//!
//! Algorithm tags map to potentials and constraint sets as follows, where `W_p`
//! is twice the ℓp norm of the true parameter (or of its singular values):
//!
//! | tag          | potential    | vector set     | matrix set         |
//! |--------------|--------------|----------------|--------------------|
//! | `glmtron`    | Euclidean    | ℓ1 ball `W_1`  | spectral ℓ1 `W_1`  |
//! | `pnorm`      | `½‖·‖_p²`    | ℓp ball `W_p`  | spectral ℓp `W_p`  |
//! | `hypentropy` | hypentropy β | ℓ1 ball `W_1`  | spectral ℓ1 `W_1`  |
//!
//! With `project = false` every algorithm runs unconstrained. A grid value
//! `λ = 0` produces a no-update baseline record.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, PartialTrace, Result};
use crate::geometry::Potential;
use crate::harness::data::{sample_sparse_task, SparseTask, SparseTaskSpec};
use crate::harness::seed::{derive_seed, DATA_STREAM};
use crate::harness::thread_pool;
use crate::linalg::{l1_norm, lp_norm, singular_values};
use crate::matrixglm::{fit_spectral_with_holdout, matrix_empirical_risk, nuclear_norm, simulate, SystemSpec, TrajectorySet};
use crate::model::{evaluate, Activation, XiMode};
use crate::projection::ConstraintSet;
use crate::trainer::{fit_full_batch_with_holdout, initialize, ReflectronConfig, TrainTrace};

/// Coordinates (or singular values) above this magnitude count toward the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Glmtron,
    Pnorm,
    Hypentropy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Glmtron, Algorithm::Pnorm, Algorithm::Hypentropy];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Glmtron => "glmtron",
            Algorithm::Pnorm => "pnorm",
            Algorithm::Hypentropy => "hypentropy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "glmtron" | "glm-tron" => Ok(Algorithm::Glmtron),
            "pnorm" | "p-norm" => Ok(Algorithm::Pnorm),
            "hypentropy" => Ok(Algorithm::Hypentropy),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub ps: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub iterations: usize,
    /// Project onto the norm ball of radius `2‖θ‖`; otherwise run unconstrained.
    pub project: bool,
    pub xi: XiMode,
}

const BETAS: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
const PS: [f64; 5] = [1.1, 1.2, 1.3, 1.4, 1.5];

impl Default for SweepGrid {
    /// The sparse-vector grid over `n` and `d`.
    fn default() -> Self {
        SweepGrid::sparse_vector()
    }
}

impl SweepGrid {
    /// Grid used for the sparse-vector training curves.
    pub fn training_curve() -> Self {
        SweepGrid {
            lambdas: vec![1.0, 0.1, 0.01, 0.001],
            algorithms: vec![Algorithm::Glmtron, Algorithm::Hypentropy],
            ps: Vec::new(),
            ..SweepGrid::sparse_vector()
        }
    }

    /// Grid used for the sparse-vector test-error sweeps.
    pub fn sparse_vector() -> Self {
        SweepGrid {
            lambdas: vec![1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001],
            betas: BETAS.to_vec(),
            ps: PS.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            trials: 5,
            iterations: 5000,
            project: true,
            xi: XiMode::One,
        }
    }

    /// Grid used for the low-rank sweeps.
    pub fn low_rank() -> Self {
        SweepGrid {
            lambdas: vec![0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001],
            ..SweepGrid::sparse_vector()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("grid needs at least one step size and one algorithm".into()));
        }
        if self.algorithms.contains(&Algorithm::Hypentropy) && self.betas.is_empty() {
            return Err(Error::Config("hypentropy requested with an empty beta list".into()));
        }
        if self.algorithms.contains(&Algorithm::Pnorm) && self.ps.is_empty() {
            return Err(Error::Config("pnorm requested with an empty p list".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("step sizes must be nonnegative, got {l}")));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::Config(format!("beta values must be positive, got {b}")));
        }
        if let Some(p) = self.ps.iter().find(|p| !(**p > 1.0 && **p <= 2.0)) {
            return Err(Error::Config(format!("p values must lie in (1, 2], got {p}")));
        }
        if self.trials == 0 || self.iterations == 0 {
            return Err(Error::Config("trials and iterations must be positive".into()));
        }
        Ok(())
    }

    /// Cells in sweep order: algorithm, then λ, then β or p.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &lambda in &self.lambdas {
                match algorithm {
                    Algorithm::Glmtron => out.push(Cell { algorithm, lambda, beta: None, p: None }),
                    Algorithm::Pnorm => {
                        out.extend(self.ps.iter().map(|&p| Cell { algorithm, lambda, beta: None, p: Some(p) }))
                    }
                    Algorithm::Hypentropy => out.extend(
                        self.betas.iter().map(|&b| Cell { algorithm, lambda, beta: Some(b), p: None }),
                    ),
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub p: Option<f64>,
}

impl Cell {
    pub fn potential(&self) -> Result<Potential> {
        match self.algorithm {
            Algorithm::Glmtron => Ok(Potential::euclidean()),
            Algorithm::Pnorm => Potential::pnorm(self.p.ok_or_else(|| Error::argument("pnorm cell without p"))?),
            Algorithm::Hypentropy => {
                Potential::hypentropy(self.beta.ok_or_else(|| Error::argument("hypentropy cell without beta"))?)
            }
        }
    }

    /// Constraint for a vector task given the true parameter norms `‖θ‖_1` and `‖θ‖_p`.
    fn constraint(&self, project: bool, spectral: bool, radius: impl Fn(f64) -> f64) -> ConstraintSet {
        if !project {
            return ConstraintSet::Unconstrained;
        }
        match (self.algorithm, self.p, spectral) {
            (Algorithm::Pnorm, Some(p), false) => ConstraintSet::LpBall { p, radius: radius(p) },
            (Algorithm::Pnorm, Some(p), true) => ConstraintSet::SpectralLp { p, radius: radius(p) },
            (_, _, false) => ConstraintSet::L1Ball { radius: radius(1.0) },
            (_, _, true) => ConstraintSet::SpectralL1 { radius: radius(1.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Training aborted; metrics describe the best iterate before the abort.
    Diverged,
    /// `λ = 0`: metrics describe the initial point.
    Baseline,
}

/// One run of one cell; CSV columns follow the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub n_train: usize,
    pub seed: u64,
    pub trial: usize,
    pub cell: usize,
    pub train_risk: f64,
    pub holdout_risk: f64,
    pub test_risk: f64,
    pub l1_error: f64,
    pub support_count: usize,
    pub seconds: f64,
    pub best_iteration: usize,
    pub status: RunStatus,
}

impl ResultRecord {
    /// Sort key: sample size, algorithm, hyperparameters, trial.
    fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        let opt = |a: Option<f64>, b: Option<f64>| a.unwrap_or(-1.0).total_cmp(&b.unwrap_or(-1.0));
        self.n_train
            .cmp(&other.n_train)
            .then(self.algorithm.cmp(&other.algorithm))
            .then(self.lambda.total_cmp(&other.lambda))
            .then(opt(self.beta, other.beta))
            .then(opt(self.p, other.p))
            .then(self.trial.cmp(&other.trial))
            .then(self.cell.cmp(&other.cell))
    }
}

pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| a.cmp_key(b));
}

fn support_count(v: &[f64]) -> usize {
    v.iter().filter(|x| x.abs() > SUPPORT_THRESHOLD).count()
}

/// Data for trial `trial` of a sparse-vector sweep.
pub fn sparse_trial_task(task: &SparseTaskSpec, trial: usize) -> Result<SparseTask> {
    sample_sparse_task(&SparseTaskSpec { seed: derive_seed(task.seed, trial as u64, DATA_STREAM), ..task.clone() })
}

fn sparse_config(cell: &Cell, grid: &SweepGrid, data: &SparseTask, seed: u64) -> Result<ReflectronConfig> {
    let constraint = cell.constraint(grid.project, false, |p| data.radius(p));
    Ok(ReflectronConfig::new(cell.potential()?, cell.lambda, grid.iterations)
        .with_constraint(constraint)
        .with_xi(grid.xi)
        .with_activation(Activation::sigmoid())
        .with_seed(seed))
}

/// Runs one cell against an already sampled trial task.
pub fn run_sparse_cell_on(
    data: &SparseTask,
    task: &SparseTaskSpec,
    grid: &SweepGrid,
    trial: usize,
    cell_index: usize,
) -> Result<ResultRecord> {
    let cells = grid.cells();
    let cell = cells
        .get(cell_index)
        .ok_or_else(|| Error::argument(format!("cell {cell_index} out of range ({} cells)", cells.len())))?;
    let seed = derive_seed(task.seed, trial as u64, cell_index as u64);
    let mut cfg = sparse_config(cell, grid, data, seed)?;
    let started = Instant::now();
    let (params, status, best_iteration, holdout) = if cell.lambda == 0.0 {
        cfg.step_size = 1.0;
        (initialize(&cfg, data.train.dim())?, RunStatus::Baseline, 0, None)
    } else {
        match fit_full_batch_with_holdout(&cfg, &data.train, &data.holdout) {
            Ok(tr) => {
                let h = tr.best_holdout_risk();
                (tr.best_params, RunStatus::Ok, tr.best_iteration, h)
            }
            Err(Error::Diverged(div)) => match div.partial {
                PartialTrace::Vector(tr) => {
                    let h = tr.best_holdout_risk();
                    (tr.best_params, RunStatus::Diverged, tr.best_iteration, h)
                }
                PartialTrace::Matrix(_) => return Err(Error::Internal("matrix trace from a vector fit".into())),
            },
            Err(e) => return Err(e),
        }
    };
    let act = cfg.activation;
    let train = evaluate(&params, &data.train, &act, cfg.xi, false)?;
    let holdout_risk = match holdout {
        Some(h) => h,
        None => evaluate(&params, &data.holdout, &act, cfg.xi, false)?.err,
    };
    let test = evaluate(&params, &data.test, &act, cfg.xi, false)?;
    Ok(ResultRecord {
        algorithm: cell.algorithm,
        lambda: cell.lambda,
        beta: cell.beta,
        p: cell.p,
        n_train: data.train.len(),
        seed: task.seed,
        trial,
        cell: cell_index,
        train_risk: train.err,
        holdout_risk,
        test_risk: test.excess.unwrap_or(test.err),
        l1_error: l1_norm((&params - &data.theta).as_slice()),
        support_count: support_count(params.as_slice()),
        seconds: started.elapsed().as_secs_f64(),
        best_iteration,
        status,
    })
}

/// Reruns a single `(trial, cell)` of a sparse-vector sweep from scratch.
pub fn run_sparse_cell(task: &SparseTaskSpec, grid: &SweepGrid, trial: usize, cell_index: usize) -> Result<ResultRecord> {
    grid.validate()?;
    let data = sparse_trial_task(task, trial)?;
    run_sparse_cell_on(&data, task, grid, trial, cell_index)
}

/// Runs every cell for every trial; records come back sorted.
pub fn run_sweep(task: &SparseTaskSpec, grid: &SweepGrid) -> Result<Vec<ResultRecord>> {
    grid.validate()?;
    task.validate()?;
    let pool = thread_pool()?;
    pool.install(|| {
        let tasks: Vec<SparseTask> =
            (0..grid.trials).into_par_iter().map(|t| sparse_trial_task(task, t)).collect::<Result<_>>()?;
        let n_cells = grid.cells().len();
        let jobs: Vec<(usize, usize)> =
            (0..grid.trials).flat_map(|t| (0..n_cells).map(move |c| (t, c))).collect();
        let mut records: Vec<ResultRecord> = jobs
            .into_par_iter()
            .map(|(t, c)| run_sparse_cell_on(&tasks[t], task, grid, t, c))
            .collect::<Result<_>>()?;
        sort_records(&mut records);
        Ok(records)
    })
}

/// Sizes and seed of a low-rank experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankOptions {
    pub n_train: usize,
    pub n_holdout: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for LowRankOptions {
    fn default() -> Self {
        LowRankOptions { n_train: 200, n_holdout: 100, n_test: 200, seed: 0 }
    }
}

/// Trajectories for trial `trial`: `(train, holdout, test)`.
pub fn lowrank_trial_data(
    spec: &SystemSpec,
    opts: &LowRankOptions,
    trial: usize,
) -> Result<(TrajectorySet, TrajectorySet, TrajectorySet)> {
    let total = opts.n_train + opts.n_holdout + opts.n_test;
    if opts.n_train == 0 || opts.n_holdout == 0 || opts.n_test == 0 {
        return Err(Error::argument("train, holdout and test trajectory counts must be positive"));
    }
    let all = simulate(spec, total, derive_seed(opts.seed, trial as u64, DATA_STREAM))?;
    let range = |lo: usize, hi: usize| (lo..hi).collect::<Vec<_>>();
    let a = opts.n_train;
    let b = a + opts.n_holdout;
    Ok((all.subset(&range(0, a))?, all.subset(&range(a, b))?, all.subset(&range(b, total))?))
}

struct LowRankTrial {
    train: TrajectorySet,
    holdout: TrajectorySet,
    test: TrajectorySet,
}

fn run_lowrank_cell_on(
    data: &LowRankTrial,
    spec: &SystemSpec,
    opts: &LowRankOptions,
    grid: &SweepGrid,
    trial: usize,
    cell_index: usize,
) -> Result<ResultRecord> {
    let cells = grid.cells();
    let cell = cells
        .get(cell_index)
        .ok_or_else(|| Error::argument(format!("cell {cell_index} out of range ({} cells)", cells.len())))?;
    let sv = spec.singular_values();
    let constraint = cell.constraint(grid.project, true, |p| 2.0 * lp_norm(sv.as_slice(), p));
    let seed = derive_seed(opts.seed, trial as u64, cell_index as u64);
    let cfg = ReflectronConfig::new(cell.potential()?, cell.lambda.max(f64::MIN_POSITIVE), grid.iterations)
        .with_constraint(constraint)
        .with_xi(grid.xi)
        .with_seed(seed);
    let started = Instant::now();
    let zero = DMatrix::zeros(spec.dim, spec.dim);
    let (params, status, best_iteration, holdout): (DMatrix<f64>, _, _, Option<f64>) = if cell.lambda == 0.0 {
        (zero, RunStatus::Baseline, 0, None)
    } else {
        let unpack = |tr: TrainTrace<DMatrix<f64>>| {
            let h = tr.best_holdout_risk();
            (tr.best_params, tr.best_iteration, h)
        };
        match fit_spectral_with_holdout(&cfg, &data.train, &data.holdout, spec) {
            Ok(tr) => {
                let (p, b, h) = unpack(tr);
                (p, RunStatus::Ok, b, h)
            }
            Err(Error::Diverged(div)) => match div.partial {
                PartialTrace::Matrix(tr) => {
                    let (p, b, h) = unpack(tr);
                    (p, RunStatus::Diverged, b, h)
                }
                PartialTrace::Vector(_) => return Err(Error::Internal("vector trace from a matrix fit".into())),
            },
            Err(e) => return Err(e),
        }
    };
    let holdout_risk = match holdout {
        Some(h) => h,
        None => matrix_empirical_risk(&params, &data.holdout, spec)?,
    };
    let s = singular_values(&params)?;
    Ok(ResultRecord {
        algorithm: cell.algorithm,
        lambda: cell.lambda,
        beta: cell.beta,
        p: cell.p,
        n_train: data.train.len(),
        seed: opts.seed,
        trial,
        cell: cell_index,
        train_risk: matrix_empirical_risk(&params, &data.train, spec)?,
        holdout_risk,
        test_risk: matrix_empirical_risk(&params, &data.test, spec)?,
        l1_error: nuclear_norm(&(&params - &spec.theta))?,
        support_count: support_count(s.as_slice()),
        seconds: started.elapsed().as_secs_f64(),
        best_iteration,
        status,
    })
}

/// Reruns a single `(trial, cell)` of a low-rank sweep.
pub fn run_lowrank_cell(
    spec: &SystemSpec,
    opts: &LowRankOptions,
    grid: &SweepGrid,
    trial: usize,
    cell_index: usize,
) -> Result<ResultRecord> {
    grid.validate()?;
    let (train, holdout, test) = lowrank_trial_data(spec, opts, trial)?;
    run_lowrank_cell_on(&LowRankTrial { train, holdout, test }, spec, opts, grid, trial, cell_index)
}

/// Low-rank system-identification sweep; records come back sorted.
pub fn run_lowrank_experiment(spec: &SystemSpec, opts: &LowRankOptions, grid: &SweepGrid) -> Result<Vec<ResultRecord>> {
    grid.validate()?;
    spec.validate()?;
    let pool = thread_pool()?;
    pool.install(|| {
        let trials: Vec<LowRankTrial> = (0..grid.trials)
            .into_par_iter()
            .map(|t| lowrank_trial_data(spec, opts, t).map(|(train, holdout, test)| LowRankTrial { train, holdout, test }))
            .collect::<Result<_>>()?;
        let n_cells = grid.cells().len();
        let jobs: Vec<(usize, usize)> =
            (0..grid.trials).flat_map(|t| (0..n_cells).map(move |c| (t, c))).collect();
        let mut records: Vec<ResultRecord> = jobs
            .into_par_iter()
            .map(|(t, c)| run_lowrank_cell_on(&trials[t], spec, opts, grid, t, c))
            .collect::<Result<_>>()?;
        sort_records(&mut records);
        Ok(records)
    })
}
