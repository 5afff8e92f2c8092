//! Vector-valued GLM system identification.
//!
//! The system evolves as `x_{t+1} = ρ·x_t + σ(Θ·x_t) + w_t` with the sigmoid
//! applied elementwise. Given `n` trajectories of length `T + 1`, the learner
//! fits `Θ̂` by the matrix analogue of the Reflectron iteration with
//! pseudogradient
//!
//! ```text
//! g(Θ̂) = 1/(nT) Σ_i Σ_t (σ(Θ̂ x_t) − x_{t+1} + ρ x_t) ξ ⊙ x_tᵀ
//! ```
//!
//! and risk `ε̂(Θ̂) = 1/(2nT) Σ ‖x_{t+1} − ρ x_t − σ(Θ̂ x_t)‖²`.
//!
//! The Euclidean potential acts entrywise. The ℓq and hypentropy potentials
//! act on singular values: the dual point is `U·diag(∇ψ(s))·Vᵀ` for the
//! current iterate `U·diag(s)·Vᵀ`, and the primal point is recovered from the
//! SVD of the updated dual matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, PartialTrace, Result};
use crate::geometry::{Potential, PotentialKind};
use crate::linalg::{l1_norm, singular_values, svd, Svd};
use crate::model::{sigmoid, Activation, ActivationKind, XiMode};
use crate::projection::{bregman_project, project_spectral, recompose, ConstraintSet};
use crate::trainer::{diverged, guard, Metrics, Recorder, ReflectronConfig, TrainTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub dim: usize,
    pub rank: usize,
    /// Decay ρ in `[0, 1)`.
    pub rho: f64,
    /// Half-width σ_w of the uniform process noise.
    pub noise: f64,
    pub horizon: usize,
    pub theta: DMatrix<f64>,
}

impl SystemSpec {
    /// Wraps a known matrix; its numerical rank is recorded.
    pub fn new(theta: DMatrix<f64>, rho: f64, noise: f64, horizon: usize) -> Result<Self> {
        if !theta.is_square() || theta.nrows() == 0 {
            return Err(Error::argument("system matrix must be square and nonempty"));
        }
        let s = theta.singular_values();
        let top = s.max();
        let rank = s.iter().filter(|&&v| v > top * 1e-10 && v > 0.0).count();
        let spec = SystemSpec { dim: theta.nrows(), rank, rho, noise, horizon, theta };
        spec.validate()?;
        Ok(spec)
    }

    /// `Θ = A·Bᵀ` with standard Gaussian `d × r` factors, scaled to unit spectral norm.
    pub fn random(dim: usize, rank: usize, rho: f64, noise: f64, horizon: usize, seed: u64) -> Result<Self> {
        if rank == 0 || rank > dim {
            return Err(Error::argument(format!("rank must lie in [1, {dim}], got {rank}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |r, c| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = gauss(dim, rank);
        let b = gauss(dim, rank);
        let mut theta = a * b.transpose();
        let top = theta.singular_values().max();
        theta /= top;
        let spec = SystemSpec { dim, rank, rho, noise, horizon, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::argument(format!("decay must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::argument(format!("noise level must be nonnegative, got {}", self.noise)));
        }
        if self.horizon == 0 {
            return Err(Error::argument("horizon must be at least 1"));
        }
        if self.theta.nrows() != self.dim || self.theta.ncols() != self.dim {
            return Err(Error::argument("system matrix shape does not match the dimension"));
        }
        Ok(())
    }

    /// Singular values of Θ, descending.
    pub fn singular_values(&self) -> DVector<f64> {
        self.theta.singular_values()
    }
}

/// `n` trajectories of `T + 1` states, stored as columns `i·(T+1) + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    count: usize,
    horizon: usize,
    states: DMatrix<f64>,
}

impl TrajectorySet {
    /// From a `d × n(T+1)` matrix of stacked trajectories.
    pub fn from_states(states: DMatrix<f64>, horizon: usize) -> Result<Self> {
        if horizon == 0 || states.ncols() % (horizon + 1) != 0 || states.ncols() == 0 {
            return Err(Error::argument("state matrix does not split into trajectories of the given horizon"));
        }
        Ok(TrajectorySet { count: states.ncols() / (horizon + 1), horizon, states })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn state(&self, trajectory: usize, t: usize) -> DVector<f64> {
        self.states.column(trajectory * (self.horizon + 1) + t).into_owned()
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn subset(&self, indices: &[usize]) -> Result<TrajectorySet> {
        let w = self.horizon + 1;
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.count) {
            return Err(Error::argument(format!("trajectory {bad} out of range")));
        }
        let mut cols = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            cols.extend((i * w..(i + 1) * w).map(|c| self.states.column(c).into_owned()));
        }
        TrajectorySet::from_states(DMatrix::from_columns(&cols), self.horizon)
    }
}

/// Draws `n` trajectories with `x_0 ~ U[−1, 1]^d` and `w_t ~ U[−σ_w, σ_w]^d`.
pub fn simulate(spec: &SystemSpec, n: usize, seed: u64) -> Result<TrajectorySet> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::argument("need at least one trajectory"));
    }
    let (d, h) = (spec.dim, spec.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = DMatrix::zeros(d, n * (h + 1));
    for i in 0..n {
        let base = i * (h + 1);
        let mut x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
        states.set_column(base, &x);
        for t in 1..=h {
            let drive = &spec.theta * &x;
            let mut next = x * spec.rho + drive.map(sigmoid);
            if spec.noise > 0.0 {
                for v in next.iter_mut() {
                    *v += rng.random_range(-spec.noise..=spec.noise);
                }
            }
            states.set_column(base + t, &next);
            x = next;
        }
    }
    TrajectorySet::from_states(states, h)
}

/// Inputs `x_t` and targets `x_{t+1} − ρ x_t` laid out as `d × nT` matrices.
struct Prepared {
    inputs: DMatrix<f64>,
    inputs_t: DMatrix<f64>,
    targets: DMatrix<f64>,
}

impl Prepared {
    fn new(data: &TrajectorySet, rho: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::argument("empty trajectory set"));
        }
        let (n, h, d) = (data.count, data.horizon, data.dim());
        let mut inputs = DMatrix::zeros(d, n * h);
        let mut targets = DMatrix::zeros(d, n * h);
        for i in 0..n {
            for t in 0..h {
                let c = i * h + t;
                let x = data.states.column(i * (h + 1) + t);
                let y = data.states.column(i * (h + 1) + t + 1);
                inputs.set_column(c, &x);
                targets.set_column(c, &(y - x * rho));
            }
        }
        let inputs_t = inputs.transpose();
        Ok(Prepared { inputs, inputs_t, targets })
    }

    fn samples(&self) -> f64 {
        self.inputs.ncols() as f64
    }

    /// Residuals `σ(Θ̂ x_t) − (x_{t+1} − ρ x_t)` and pre-activations.
    fn residuals(&self, theta: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let z = theta * &self.inputs;
        let r = z.zip_map(&self.targets, |a, y| sigmoid(a) - y);
        (r, z)
    }

    fn risk(&self, theta: &DMatrix<f64>) -> f64 {
        let (r, _) = self.residuals(theta);
        r.norm_squared() / (2.0 * self.samples())
    }

    fn risk_and_gradient(&self, theta: &DMatrix<f64>, xi: XiMode) -> (f64, DMatrix<f64>) {
        let (mut r, z) = self.residuals(theta);
        let m = self.samples();
        let risk = r.norm_squared() / (2.0 * m);
        if xi == XiMode::Derivative {
            let act = Activation::sigmoid();
            r.zip_apply(&z, |ri, zi| *ri *= act.derivative(zi));
        }
        let mut g = r * &self.inputs_t;
        g /= m;
        (risk, g)
    }
}

fn check_dims(theta: &DMatrix<f64>, data: &TrajectorySet) -> Result<()> {
    if theta.nrows() != data.dim() || theta.ncols() != data.dim() {
        return Err(Error::argument(format!(
            "estimate is {}×{}, trajectories have dimension {}",
            theta.nrows(),
            theta.ncols(),
            data.dim()
        )));
    }
    Ok(())
}

/// Matrix pseudogradient, with ξ applied elementwise in derivative mode.
pub fn matrix_pseudogradient(
    theta: &DMatrix<f64>,
    data: &TrajectorySet,
    spec: &SystemSpec,
    xi: XiMode,
) -> Result<DMatrix<f64>> {
    check_dims(theta, data)?;
    Ok(Prepared::new(data, spec.rho)?.risk_and_gradient(theta, xi).1)
}

/// `1/(2nT) Σ ‖x_{t+1} − ρ x_t − σ(Θ̂ x_t)‖²`
pub fn matrix_empirical_risk(theta: &DMatrix<f64>, data: &TrajectorySet, spec: &SystemSpec) -> Result<f64> {
    check_dims(theta, data)?;
    Ok(Prepared::new(data, spec.rho)?.risk(theta))
}


/// Seeded split of trajectories; the trailing fraction is held out.
pub fn split_trajectories(
    data: &TrajectorySet,
    fraction: f64,
    seed: u64,
) -> Result<(TrajectorySet, Option<TrajectorySet>)> {
    let n = data.len();
    let n_hold = (fraction * n as f64).round() as usize;
    if n_hold == 0 {
        return Ok((data.clone(), None));
    }
    if n_hold >= n {
        return Err(Error::argument("holdout fraction leaves no training trajectories"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = idx.split_at(n - n_hold);
    Ok((data.subset(a)?, Some(data.subset(b)?)))
}

/// Spectral Reflectron; holds out `config.holdout_fraction` of the trajectories.
pub fn fit_spectral(
    config: &ReflectronConfig,
    data: &TrajectorySet,
    spec: &SystemSpec,
) -> Result<TrainTrace<DMatrix<f64>>> {
    config.validate()?;
    let (train, holdout) = split_trajectories(data, config.holdout_fraction, config.seed)?;
    run_spectral(config, &train, holdout.as_ref(), spec)
}

/// Spectral Reflectron with an explicit holdout trajectory set.
pub fn fit_spectral_with_holdout(
    config: &ReflectronConfig,
    train: &TrajectorySet,
    holdout: &TrajectorySet,
    spec: &SystemSpec,
) -> Result<TrainTrace<DMatrix<f64>>> {
    config.validate()?;
    run_spectral(config, train, Some(holdout), spec)
}

fn run_spectral(
    config: &ReflectronConfig,
    train: &TrajectorySet,
    holdout: Option<&TrajectorySet>,
    spec: &SystemSpec,
) -> Result<TrainTrace<DMatrix<f64>>> {
    spec.validate()?;
    if config.activation.kind != ActivationKind::Sigmoid {
        return Err(Error::argument("the system is driven by the sigmoid; other activations are not supported"));
    }
    if !matches!(config.constraint, ConstraintSet::Unconstrained) && !config.constraint.is_spectral() {
        return Err(Error::argument(format!(
            "matrix fits take a spectral constraint or none, got {:?}",
            config.constraint
        )));
    }
    let psi = &config.potential;
    if matches!(psi.kind(), PotentialKind::NegEntropy { .. }) {
        return Err(Error::unsupported("negative entropy has no spectral lifting here"));
    }
    let d = spec.dim;
    check_dims(&DMatrix::zeros(d, d), train)?;
    if let Some(h) = holdout {
        check_dims(&DMatrix::zeros(d, d), h)?;
    }
    let set = config.constraint;
    let vector_set = set.vector_analog();
    // fail early on pairings without a projection
    bregman_project(psi, &vector_set, &DVector::zeros(d))?;

    let prep = Prepared::new(train, spec.rho)?;
    let hold = holdout.map(|h| Prepared::new(h, spec.rho)).transpose()?;
    let lambda = config.step_size;
    let entrywise = matches!(psi.kind(), PotentialKind::Euclidean);

    let mut theta = DMatrix::zeros(d, d);
    let mut spectrum = Svd { u: DMatrix::identity(d, d), s: DVector::zeros(d), v_t: DMatrix::identity(d, d) };
    let mut rec = Recorder::new(theta.clone(), config.iterations, hold.is_some(), false, false, config.record_trace);
    let (_, mut g) = prep.risk_and_gradient(&theta, config.xi);

    for t in 1..=config.iterations {
        let step = if entrywise {
            theta.zip_apply(&g, |a, b| *a -= lambda * b);
            if matches!(set, ConstraintSet::Unconstrained) {
                Ok(())
            } else {
                project_spectral(&set, &theta, psi).map(|p| theta = p)
            }
        } else {
            lifted_step(psi, &vector_set, &mut spectrum, &g, lambda).map(|p| theta = p)
        };
        if let Err(e) = step {
            return match e {
                Error::Numeric { .. } | Error::Domain(_) => Err(diverged(rec, t, e.to_string(), PartialTrace::Matrix)),
                other => Err(other),
            };
        }
        let risk;
        (risk, g) = prep.risk_and_gradient(&theta, config.xi);
        if let Some(reason) = guard(risk, theta.as_slice()) {
            return Err(diverged(rec, t, reason, PartialTrace::Matrix));
        }
        let metrics = Metrics {
            train: risk,
            holdout: hold.as_ref().map(|h| h.risk(&theta)),
            excess: None,
            divergence: None,
        };
        rec.push(metrics, &theta);
    }
    Ok(rec.finish())
}

/// Mirror step on singular values followed by the vector projection.
fn lifted_step(
    psi: &Potential,
    vector_set: &ConstraintSet,
    spectrum: &mut Svd,
    g: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let dual_s = psi.gradient(&spectrum.s)?;
    let mut dual = recompose(&spectrum.u, &dual_s, &spectrum.v_t);
    dual.zip_apply(g, |a, b| *a -= lambda * b);
    if let Some(i) = dual.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric { message: format!("non-finite dual entry {i}"), residual: f64::INFINITY });
    }
    let next = svd(&dual)?;
    let primal_s = psi.gradient_inverse(&next.s)?;
    let s = bregman_project(psi, vector_set, &primal_s)?;
    let theta = recompose(&next.u, &s, &next.v_t);
    *spectrum = Svd { u: next.u, s, v_t: next.v_t };
    Ok(theta)
}

/// Nuclear norm `‖Θ‖_*`.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(l1_norm(singular_values(m)?.as_slice()))
}
