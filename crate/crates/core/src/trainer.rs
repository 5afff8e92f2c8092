//! Full-batch and stochastic Reflectron loops, step-size rules and holdout selection.
//!
//! Every loop carries the dual point `∇ψ(θ̂_t)`, takes the step
//! `∇ψ(φ) = ∇ψ(θ̂_t) − λ·g`, maps back with `(∇ψ)⁻¹` and projects. When the
//! projection is not the identity the dual point is recomputed from the
//! projected primal point.
//!
//! Traces are recorded *after* each update: entry `t − 1` (zero-based)
//! describes `θ̂_{t+1}`, so a run of `T` iterations yields `T` entries and the
//! last entry describes [`TrainTrace::final_params`]. The starting point
//! `θ̂_1` is kept in [`TrainTrace::initial_params`].

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Divergence, Error, PartialTrace, Result};
use crate::geometry::{Potential, PotentialKind};
use crate::linalg::dot;
use crate::model::{evaluate, Activation, Dataset, Hypothesis, XiMode};
use crate::projection::{bregman_project, ConstraintSet};

/// Training aborts once the empirical risk exceeds this value.
pub const DIVERGENCE_RISK: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectronConfig {
    pub potential: Potential,
    pub constraint: ConstraintSet,
    pub xi: XiMode,
    pub activation: Activation,
    pub step_size: f64,
    pub iterations: usize,
    /// Fraction of the data held out by [`fit_full_batch`], in `[0, 1)`.
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Keep a copy of every iterate in [`TrainTrace::iterates`].
    pub record_trace: bool,
    /// Parameter against which `D_ψ(reference, θ̂_t)` is tracked.
    pub reference: Option<DVector<f64>>,
}

impl ReflectronConfig {
    /// Unconstrained, `ξ ≡ 1`, sigmoid activation, no holdout, seed 0.
    pub fn new(potential: Potential, step_size: f64, iterations: usize) -> Self {
        ReflectronConfig {
            potential,
            constraint: ConstraintSet::Unconstrained,
            xi: XiMode::One,
            activation: Activation::sigmoid(),
            step_size,
            iterations,
            holdout_fraction: 0.0,
            seed: 0,
            record_trace: false,
            reference: None,
        }
    }

    pub fn with_constraint(mut self, constraint: ConstraintSet) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn with_xi(mut self, xi: XiMode) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_holdout_fraction(mut self, fraction: f64) -> Self {
        self.holdout_fraction = fraction;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_record_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn with_reference(mut self, reference: DVector<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::argument(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.iterations == 0 {
            return Err(Error::argument("iteration budget must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::argument(format!(
                "holdout fraction must lie in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        self.constraint.validate()
    }
}

/// Per-iteration record of a run, generic over vector or matrix parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace<P> {
    /// Full batch: empirical risk of `θ̂_{t+1}`. Stochastic: loss of `θ̂_t` on the sample it then steps on.
    pub train_risk: Vec<f64>,
    pub holdout_risk: Option<Vec<f64>>,
    /// Excess risk against clean labels (training data for full batch, the evaluation set for stochastic runs).
    pub excess_risk: Option<Vec<f64>>,
    pub divergence_to_reference: Option<Vec<f64>>,
    pub iterates: Option<Vec<P>>,
    /// 1-based index into the trace; 0 means the initial point.
    pub best_iteration: usize,
    pub best_params: P,
    pub final_params: P,
    pub initial_params: P,
    /// Set when a stochastic stream ran out before the iteration budget.
    pub truncated: bool,
}

impl<P> TrainTrace<P> {
    pub fn len(&self) -> usize {
        self.train_risk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_risk.is_empty()
    }

    /// Holdout risk at the selected iterate, if one was recorded.
    pub fn best_holdout_risk(&self) -> Option<f64> {
        let h = self.holdout_risk.as_ref()?;
        (self.best_iteration > 0).then(|| h[self.best_iteration - 1])
    }
}

/// Index (0-based) of the smallest finite value; ties go to the earliest.
pub fn holdout_argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Accumulates a trace and tracks the best-by-holdout iterate as it goes.
pub(crate) struct Recorder<P> {
    trace: TrainTrace<P>,
    best_value: f64,
}

pub(crate) struct Metrics {
    pub train: f64,
    pub holdout: Option<f64>,
    pub excess: Option<f64>,
    pub divergence: Option<f64>,
}

impl<P: Clone> Recorder<P> {
    pub fn new(initial: P, capacity: usize, holdout: bool, excess: bool, divergence: bool, iterates: bool) -> Self {
        let v = || Vec::with_capacity(capacity);
        Recorder {
            trace: TrainTrace {
                train_risk: v(),
                holdout_risk: holdout.then(v),
                excess_risk: excess.then(v),
                divergence_to_reference: divergence.then(v),
                iterates: iterates.then(|| Vec::with_capacity(capacity)),
                best_iteration: 0,
                best_params: initial.clone(),
                final_params: initial.clone(),
                initial_params: initial,
                truncated: false,
            },
            best_value: f64::INFINITY,
        }
    }

    pub fn push(&mut self, m: Metrics, params: &P) {
        let t = &mut self.trace;
        t.train_risk.push(m.train);
        if let (Some(v), Some(x)) = (t.holdout_risk.as_mut(), m.holdout) {
            v.push(x);
            if x < self.best_value {
                self.best_value = x;
                t.best_iteration = t.train_risk.len();
                t.best_params = params.clone();
            }
        }
        if let (Some(v), Some(x)) = (t.excess_risk.as_mut(), m.excess) {
            v.push(x);
        }
        if let (Some(v), Some(x)) = (t.divergence_to_reference.as_mut(), m.divergence) {
            v.push(x);
        }
        if let Some(v) = t.iterates.as_mut() {
            v.push(params.clone());
        }
        t.final_params = params.clone();
    }

    pub fn finish(mut self) -> TrainTrace<P> {
        if self.trace.holdout_risk.is_none() && !self.trace.train_risk.is_empty() {
            self.trace.best_iteration = self.trace.train_risk.len();
            self.trace.best_params = self.trace.final_params.clone();
        }
        self.trace
    }

    pub fn truncate(&mut self) {
        self.trace.truncated = true;
    }

}

pub(crate) fn diverged<P: Clone>(
    rec: Recorder<P>,
    iteration: usize,
    reason: String,
    wrap: fn(TrainTrace<P>) -> PartialTrace,
) -> Error {
    Error::Diverged(Box::new(Divergence { iteration, reason, partial: wrap(rec.finish()) }))
}

/// Returns the reason training must stop, if any.
pub(crate) fn guard(risk: f64, params: &[f64]) -> Option<String> {
    if !risk.is_finite() {
        return Some(format!("non-finite empirical risk {risk}"));
    }
    if risk > DIVERGENCE_RISK {
        return Some(format!("empirical risk {risk:e} exceeds {DIVERGENCE_RISK:e}; the step size is likely too large"));
    }
    if let Some(i) = params.iter().position(|x| !x.is_finite()) {
        return Some(format!("non-finite parameter coordinate {i}"));
    }
    None
}

/// Starting point: the minimizer of ψ (zero, or the negentropy reference), projected if infeasible.
pub fn initialize(config: &ReflectronConfig, dim: usize) -> Result<DVector<f64>> {
    let w = config.potential.minimizer(dim)?;
    if matches!(config.constraint, ConstraintSet::Simplex)
        && !matches!(config.potential.kind(), PotentialKind::NegEntropy { .. })
    {
        return Err(Error::unsupported(format!(
            "simplex constraint with {} potential",
            config.potential.name()
        )));
    }
    if config.constraint.contains(w.as_slice(), 0.0) {
        Ok(w)
    } else {
        bregman_project(&config.potential, &config.constraint, &w)
    }
}

/// One mirror step followed by projection. Returns the new (primal, dual) pair.
fn mirror_step(
    psi: &Potential,
    set: &ConstraintSet,
    dual: &mut DVector<f64>,
    step: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    dual.axpy(-lambda, step, 1.0);
    let phi = psi.gradient_inverse(dual)?;
    if matches!(set, ConstraintSet::Unconstrained) {
        return Ok(phi);
    }
    let theta = bregman_project(psi, set, &phi)?;
    *dual = psi.gradient(&theta)?;
    Ok(theta)
}

/// Deterministic seeded split: shuffle the rows, hold out the trailing fraction.
pub fn split_holdout(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::argument(format!("holdout fraction must lie in [0, 1), got {fraction}")));
    }
    let n = data.len();
    let n_hold = (fraction * n as f64).round() as usize;
    if n_hold == 0 {
        return Ok((data.clone(), None));
    }
    if n_hold >= n {
        return Err(Error::argument("holdout fraction leaves no training rows"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, hold) = idx.split_at(n - n_hold);
    Ok((data.subset(train)?, Some(data.subset(hold)?)))
}

/// Full-batch loop; holds out `config.holdout_fraction` of `data` for model selection.
pub fn fit_full_batch(config: &ReflectronConfig, data: &Dataset) -> Result<TrainTrace<DVector<f64>>> {
    config.validate()?;
    let (train, holdout) = split_holdout(data, config.holdout_fraction, config.seed)?;
    run_full_batch(config, &train, holdout.as_ref())
}

/// Full-batch loop with an explicit holdout set (`holdout_fraction` is ignored).
pub fn fit_full_batch_with_holdout(
    config: &ReflectronConfig,
    train: &Dataset,
    holdout: &Dataset,
) -> Result<TrainTrace<DVector<f64>>> {
    config.validate()?;
    run_full_batch(config, train, Some(holdout))
}

fn run_full_batch(
    config: &ReflectronConfig,
    train: &Dataset,
    holdout: Option<&Dataset>,
) -> Result<TrainTrace<DVector<f64>>> {
    if train.is_empty() {
        return Err(Error::argument("empty training set"));
    }
    if let Some(h) = holdout {
        if h.dim() != train.dim() || h.is_empty() {
            return Err(Error::argument("holdout set must be nonempty with the training dimension"));
        }
    }
    if let Some(r) = &config.reference {
        if r.len() != train.dim() {
            return Err(Error::argument("reference parameter has the wrong dimension"));
        }
    }
    let psi = &config.potential;
    let act = &config.activation;
    let mut theta = initialize(config, train.dim())?;
    let mut dual = psi.gradient(&theta)?;
    let mut rec = Recorder::new(
        theta.clone(),
        config.iterations,
        holdout.is_some(),
        train.clean_labels().is_some(),
        config.reference.is_some(),
        config.record_trace,
    );
    let mut pass = evaluate(&theta, train, act, config.xi, true)?;
    for t in 1..=config.iterations {
        let g = pass.pseudogradient.take().expect("gradient requested");
        theta = match mirror_step(psi, &config.constraint, &mut dual, &g, config.step_size) {
            Ok(th) => th,
            Err(e @ (Error::Numeric { .. } | Error::Domain(_))) => {
                return Err(diverged(rec, t, e.to_string(), PartialTrace::Vector))
            }
            Err(e) => return Err(e),
        };
        pass = evaluate(&theta, train, act, config.xi, t < config.iterations)?;
        if let Some(reason) = guard(pass.err, theta.as_slice()) {
            return Err(diverged(rec, t, reason, PartialTrace::Vector));
        }
        let metrics = Metrics {
            train: pass.err,
            holdout: holdout.map(|h| evaluate(&theta, h, act, config.xi, false).map(|e| e.err)).transpose()?,
            excess: pass.excess,
            divergence: config.reference.as_ref().map(|r| psi.divergence(r, &theta)).transpose()?,
        };
        rec.push(metrics, &theta);
    }
    Ok(rec.finish())
}

/// One streamed example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: DVector<f64>,
    pub y: f64,
}

/// Single-sample loop over `stream`, stopping after `config.iterations` samples.
///
/// When `eval` is given, its empirical risk (and excess risk, if it carries
/// clean labels) is recorded after every update and drives best-iterate
/// selection. A stream that runs dry early sets [`TrainTrace::truncated`].
pub fn fit_stochastic<I>(
    config: &ReflectronConfig,
    stream: I,
    eval: Option<&Dataset>,
) -> Result<TrainTrace<DVector<f64>>>
where
    I: IntoIterator<Item = Sample>,
{
    config.validate()?;
    let mut stream = stream.into_iter().peekable();
    let dim = match (stream.peek(), eval) {
        (Some(s), _) => s.x.len(),
        (None, Some(e)) => e.dim(),
        (None, None) => return Err(Error::argument("empty stream and no evaluation set")),
    };
    if let Some(e) = eval {
        if e.dim() != dim {
            return Err(Error::argument("evaluation set dimension differs from the stream"));
        }
    }
    let psi = &config.potential;
    let act = &config.activation;
    let mut theta = initialize(config, dim)?;
    let mut dual = psi.gradient(&theta)?;
    let mut rec = Recorder::new(
        theta.clone(),
        config.iterations,
        eval.is_some(),
        eval.and_then(|e| e.clean_labels()).is_some(),
        config.reference.is_some(),
        config.record_trace,
    );
    for t in 1..=config.iterations {
        let Some(sample) = stream.next() else {
            rec.truncate();
            break;
        };
        if sample.x.len() != dim {
            return Err(Error::argument(format!("sample {t} has dimension {}, expected {dim}", sample.x.len())));
        }
        let z = dot(theta.as_slice(), sample.x.as_slice());
        let r = act.apply(z) - sample.y;
        let loss = r * r;
        let g = &sample.x * (r * config.xi.weight(act, z));
        theta = match mirror_step(psi, &config.constraint, &mut dual, &g, config.step_size) {
            Ok(th) => th,
            Err(e @ (Error::Numeric { .. } | Error::Domain(_))) => {
                return Err(diverged(rec, t, e.to_string(), PartialTrace::Vector))
            }
            Err(e) => return Err(e),
        };
        if let Some(reason) = guard(loss, theta.as_slice()) {
            return Err(diverged(rec, t, reason, PartialTrace::Vector));
        }
        let ev = eval.map(|e| evaluate(&theta, e, act, config.xi, false)).transpose()?;
        let metrics = Metrics {
            train: loss,
            holdout: ev.as_ref().map(|e| e.err),
            excess: ev.as_ref().and_then(|e| e.excess),
            divergence: config.reference.as_ref().map(|r| psi.divergence(r, &theta)).transpose()?,
        };
        rec.push(metrics, &theta);
    }
    Ok(rec.finish())
}

/// Which closed-form step-size ceiling to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `σ / (2C²BL)`, the condition for the generalization guarantee.
    Theorem4,
    /// `2σ / (C²BL)`, the condition for monotone descent on realizable data.
    Lemma2Realizable,
    /// `min{2σ / (C²LB), 1/√T}` for a stochastic run of horizon `T`.
    StochasticNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBoundInputs {
    /// Strong-convexity constant of the potential; required.
    pub sigma: Option<f64>,
    /// Bound on the dual norm of the features.
    pub c: f64,
    /// Bound on ξ.
    pub b: f64,
    /// Lipschitz constant of the activation.
    pub l: f64,
    /// Horizon of a stochastic run.
    pub horizon: Option<usize>,
}

impl StepBoundInputs {
    /// Reads σ, B and L from the configuration and C from the dataset.
    pub fn from_config(config: &ReflectronConfig, data: &Dataset) -> Self {
        StepBoundInputs {
            sigma: config.potential.strong_convexity(),
            c: data.feature_bound(),
            b: config.xi.bound(&config.activation),
            l: config.activation.lipschitz,
            horizon: Some(config.iterations),
        }
    }
}

pub fn max_stable_step(inputs: &StepBoundInputs, rule: StepRule) -> Result<f64> {
    let sigma = inputs.sigma.ok_or_else(|| {
        Error::argument("the potential has no known strong-convexity constant; supply one with with_strong_convexity")
    })?;
    for (name, v) in [("sigma", sigma), ("C", inputs.c), ("B", inputs.b), ("L", inputs.l)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::argument(format!("{name} must be positive, got {v}")));
        }
    }
    let k = inputs.c * inputs.c * inputs.b * inputs.l;
    Ok(match rule {
        StepRule::Theorem4 => sigma / (2.0 * k),
        StepRule::Lemma2Realizable => 2.0 * sigma / k,
        StepRule::StochasticNoise => {
            let t = inputs.horizon.filter(|&t| t > 0).ok_or_else(|| Error::argument("stochastic rule needs a horizon"))?;
            (2.0 * sigma / k).min(1.0 / (t as f64).sqrt())
        }
    })
}

/// Hypothesis at the iterate with the lowest recorded holdout risk (earliest on ties).
pub fn select_best_by_holdout(trace: &TrainTrace<DVector<f64>>, activation: Activation) -> Result<Hypothesis> {
    let h = trace.holdout_risk.as_ref().ok_or_else(|| Error::argument("no holdout risk was recorded"))?;
    let i = holdout_argmin(h).ok_or_else(|| Error::argument("holdout curve is empty"))?;
    let params = match &trace.iterates {
        Some(it) => it[i].clone(),
        None if i + 1 == trace.best_iteration => trace.best_params.clone(),
        None => return Err(Error::Internal("best iterate was not retained".into())),
    };
    Ok(Hypothesis::new(params, activation))
}
