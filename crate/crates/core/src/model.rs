//! Activations, datasets, risks and the pseudogradient.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NormPair;
use crate::linalg::{axpy, dot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Sigmoid,
    /// Unbounded range; admitted for implicit-bias experiments, not covered by the risk bounds.
    Identity,
}

/// A known, nondecreasing, Lipschitz link function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub kind: ActivationKind,
    pub lipschitz: f64,
    pub invertible: bool,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::sigmoid()
    }
}

impl Activation {
    pub const fn sigmoid() -> Self {
        Activation { kind: ActivationKind::Sigmoid, lipschitz: 0.25, invertible: true }
    }

    pub const fn identity() -> Self {
        Activation { kind: ActivationKind::Identity, lipschitz: 1.0, invertible: true }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => sigmoid(z),
            ActivationKind::Identity => z,
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            ActivationKind::Identity => 1.0,
        }
    }

    /// `u⁻¹(y)`; `y` must lie strictly inside the range of `u`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        match self.kind {
            ActivationKind::Sigmoid => {
                if y > 0.0 && y < 1.0 {
                    Ok((y / (1.0 - y)).ln())
                } else {
                    Err(Error::domain(format!("sigmoid inverse needs y in (0, 1), got {y}")))
                }
            }
            ActivationKind::Identity => {
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::domain("identity inverse of a non-finite value"))
                }
            }
        }
    }

    /// Logit with the argument clamped to `[1e-12, 1 − 1e-12]`; for diagnostics only.
    pub fn inverse_clamped(&self, y: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => {
                let y = y.clamp(1e-12, 1.0 - 1e-12);
                (y / (1.0 - y)).ln()
            }
            ActivationKind::Identity => y,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Identity => "identity",
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smallest sigmoid slope on `{|⟨w, x⟩| ≤ a·b}`, i.e. `σ′(a·b)`, used as γ in the bounds.
pub fn sigmoid_gamma(a: f64, b: f64) -> f64 {
    Activation::sigmoid().derivative((a * b).abs())
}

/// Weight ξ multiplying each residual in the pseudogradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum XiMode {
    /// ξ ≡ 1 (GLM-tron family).
    #[default]
    One,
    /// ξ = u′(⟨θ̂, x⟩) (mirror descent on the ½-scaled square loss).
    Derivative,
}

impl XiMode {
    #[inline]
    pub fn weight(&self, activation: &Activation, z: f64) -> f64 {
        match self {
            XiMode::One => 1.0,
            XiMode::Derivative => activation.derivative(z),
        }
    }

    /// Upper bound B on ξ.
    pub fn bound(&self, activation: &Activation) -> f64 {
        match self {
            XiMode::One => 1.0,
            XiMode::Derivative => activation.lipschitz,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub params: DVector<f64>,
    pub activation: Activation,
}

impl Hypothesis {
    pub fn new(params: DVector<f64>, activation: Activation) -> Self {
        Hypothesis { params, activation }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.activation.apply(dot(self.params.as_slice(), x))
    }
}

/// Supervised samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    clean_labels: Option<Vec<f64>>,
    norm_pair: NormPair,
    feature_bound: f64,
}

impl Dataset {
    /// Builds a dataset from row-major features. `C` is set to the largest
    /// dual norm of any row under `norm_pair`.
    pub fn from_rows(
        d: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        clean_labels: Option<Vec<f64>>,
        norm_pair: NormPair,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::argument("feature dimension must be positive"));
        }
        if features.len() % d != 0 {
            return Err(Error::argument(format!(
                "{} feature values do not form rows of length {d}",
                features.len()
            )));
        }
        let n = features.len() / d;
        if labels.len() != n {
            return Err(Error::argument(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(c) = &clean_labels {
            if c.len() != n {
                return Err(Error::argument(format!("{} clean labels for {n} rows", c.len())));
            }
        }
        let feature_bound = features.chunks_exact(d).map(|r| norm_pair.dual_norm(r)).fold(0.0, f64::max);
        Ok(Dataset { n, d, features, labels, clean_labels, norm_pair, feature_bound })
    }

    /// Builds a dataset from an `n × d` feature matrix.
    pub fn from_matrix(
        x: &DMatrix<f64>,
        labels: &DVector<f64>,
        clean_labels: Option<&DVector<f64>>,
        norm_pair: NormPair,
    ) -> Result<Self> {
        let d = x.ncols();
        let rows: Vec<f64> = x.transpose().as_slice().to_vec();
        Self::from_rows(
            d,
            rows,
            labels.as_slice().to_vec(),
            clean_labels.map(|c| c.as_slice().to_vec()),
            norm_pair,
        )
    }

    /// Replaces the computed feature bound with a declared one, which must dominate every row.
    pub fn with_feature_bound(mut self, c: f64) -> Result<Self> {
        if c < self.feature_bound * (1.0 - 1e-12) {
            return Err(Error::argument(format!(
                "declared bound {c} is below the largest row norm {}",
                self.feature_bound
            )));
        }
        self.feature_bound = c;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn clean_labels(&self) -> Option<&[f64]> {
        self.clean_labels.as_deref()
    }

    pub fn norm_pair(&self) -> NormPair {
        self.norm_pair
    }

    /// Bound C on the dual norm of every feature vector.
    pub fn feature_bound(&self) -> f64 {
        self.feature_bound
    }

    pub fn feature_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.features)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::argument(format!("row index {bad} out of range for {} rows", self.n)));
        }
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut out = Dataset::from_rows(
            self.d,
            features,
            pick(&self.labels),
            self.clean_labels.as_deref().map(pick),
            self.norm_pair,
        )?;
        out.feature_bound = self.feature_bound;
        Ok(out)
    }
}

/// One pass over a dataset at fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub err: f64,
    pub excess: Option<f64>,
    pub pseudogradient: Option<DVector<f64>>,
}

/// Risks and (optionally) the pseudogradient at `theta` in a single sweep over the rows.
pub fn evaluate(
    theta: &DVector<f64>,
    data: &Dataset,
    activation: &Activation,
    xi: XiMode,
    with_gradient: bool,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::argument("empty dataset"));
    }
    if theta.len() != data.dim() {
        return Err(Error::argument(format!(
            "parameter dimension {} does not match feature dimension {}",
            theta.len(),
            data.dim()
        )));
    }
    let th = theta.as_slice();
    let mut acc = if with_gradient { vec![0.0; data.dim()] } else { Vec::new() };
    let mut err = 0.0;
    let mut excess = 0.0;
    let clean = data.clean_labels();
    for i in 0..data.len() {
        let x = data.row(i);
        let z = dot(th, x);
        let h = activation.apply(z);
        let r = h - data.labels[i];
        err += r * r;
        if let Some(c) = clean {
            let e = h - c[i];
            excess += e * e;
        }
        if with_gradient {
            axpy(r * xi.weight(activation, z), x, &mut acc);
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        err: err / n,
        excess: clean.map(|_| excess / n),
        pseudogradient: with_gradient.then(|| DVector::from_iterator(acc.len(), acc.iter().map(|a| a / n))),
    })
}

/// `(1/n) Σ (h(x_i) − y_i)²`
pub fn empirical_err(h: &Hypothesis, data: &Dataset) -> Result<f64> {
    Ok(evaluate(&h.params, data, &h.activation, XiMode::One, false)?.err)
}

/// `(1/n) Σ (h(x_i) − u(⟨θ, x_i⟩))²` against the stored clean labels.
pub fn empirical_excess(h: &Hypothesis, data: &Dataset) -> Result<f64> {
    if data.clean_labels().is_none() {
        return Err(Error::argument("excess risk needs clean labels"));
    }
    Ok(evaluate(&h.params, data, &h.activation, XiMode::One, false)?.excess.unwrap_or(f64::NAN))
}

/// `(1/n) Σ (u(⟨θ̂, x_i⟩) − y_i) ξ(θ̂, x_i) x_i`, accumulated in sample order.
///
/// With `XiMode::Derivative` this is the gradient of `½·empirical_err`.
pub fn pseudogradient(
    theta: &DVector<f64>,
    data: &Dataset,
    activation: &Activation,
    xi: XiMode,
) -> Result<DVector<f64>> {
    Ok(evaluate(theta, data, activation, xi, true)?.pseudogradient.expect("requested"))
}
