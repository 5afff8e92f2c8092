//! Closed-form generalization bounds and their ingredients.
//!
//! All evaluators are direct transcriptions of the displayed expressions; no
//! constant is tightened. The bounds hold with probability at least `1 − δ`
//! over the draw of the `n` training samples.
//!
//! Notation: `L` is the activation's Lipschitz constant, `C` bounds the dual
//! norm of the features, `W` bounds the primal norm of the true parameter,
//! `B` bounds ξ, `σ` is the potential's strong-convexity constant, `γ` is the
//! smallest ξ on the relevant ball, and `η` bounds the dual norm of the
//! pseudogradient at the true parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: f64,
    pub delta: f64,
    pub l: Option<f64>,
    pub c: Option<f64>,
    pub w: Option<f64>,
    pub b: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub psi_theta: Option<f64>,
    pub d: Option<f64>,
    pub q: Option<f64>,
}

impl BoundInputs {
    /// Inputs with only the sample size and confidence set.
    pub fn new(n: f64, delta: f64) -> Self {
        BoundInputs {
            n,
            delta,
            l: None,
            c: None,
            w: None,
            b: None,
            sigma: None,
            gamma: None,
            eta: None,
            psi_theta: None,
            d: None,
            q: None,
        }
    }

    fn common(&self) -> Result<()> {
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(Error::argument(format!("n must be at least 1, got {}", self.n)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::argument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

fn need(name: &str, v: Option<f64>) -> Result<f64> {
    let v = v.ok_or_else(|| Error::argument(format!("missing bound parameter {name}")))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::argument(format!("bound parameter {name} must be positive, got {v}")))
    }
}

fn need_nonneg(name: &str, v: Option<f64>) -> Result<f64> {
    let v = v.ok_or_else(|| Error::argument(format!("missing bound parameter {name}")))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::argument(format!("bound parameter {name} must be nonnegative, got {v}")))
    }
}

fn need_q(v: Option<f64>) -> Result<f64> {
    let q = v.ok_or_else(|| Error::argument("missing bound parameter q"))?;
    if q > 1.0 && q <= 2.0 {
        Ok(q)
    } else {
        Err(Error::argument(format!("q must lie in (1, 2], got {q}")))
    }
}

/// Rademacher complexity of a σ-strongly-convex-regularized linear class: `CW√(2/(σn))`.
pub fn rademacher_linear(c: f64, w: f64, sigma: f64, n: f64) -> f64 {
    c * w * (2.0 / (sigma * n)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum EtaRegime {
    /// Dual exponent `p ∈ [2, ∞)`, given through its conjugate `q`.
    PIn2Inf { q: f64 },
    /// ℓ∞ dual norm in dimension `d`.
    Infinity { d: f64 },
}

/// High-probability bound on the dual norm of the pseudogradient at the true parameter.
pub fn eta_bound(c: f64, n: f64, delta: f64, regime: EtaRegime) -> Result<f64> {
    BoundInputs::new(n, delta).common()?;
    let conc = (2.0 * (4.0 / delta).ln() / n).sqrt();
    Ok(match regime {
        EtaRegime::PIn2Inf { q } => {
            let q = need_q(Some(q))?;
            c * (conc + 1.0 / (n * (q - 1.0)).sqrt())
        }
        EtaRegime::Infinity { d } => {
            let d = need("d", Some(d))?;
            c * (conc + 4.0 * (d.ln() / n).sqrt())
        }
    })
}

/// `(2C²LB + 1) / (2C²LB)`
fn step_factor(c: f64, l: f64, b: f64) -> f64 {
    let k = 2.0 * c * c * l * b;
    (k + 1.0) / k
}

fn confidence(n: f64, delta: f64) -> f64 {
    (8.0 * (1.0 / delta).ln() / n).sqrt()
}

/// `√(32L²η²ψ(θ)/(γ²σ))·(2C²LB+1)/(2C²LB) + 4R_n + √(8 log(1/δ)/n)`
pub fn bound_theorem4(inputs: &BoundInputs, rademacher: f64) -> Result<f64> {
    inputs.common()?;
    let l = need("L", inputs.l)?;
    let c = need("C", inputs.c)?;
    let b = need("B", inputs.b)?;
    let sigma = need("sigma", inputs.sigma)?;
    let gamma = need("gamma", inputs.gamma)?;
    let eta = need_nonneg("eta", inputs.eta)?;
    let psi = need_nonneg("psi_theta", inputs.psi_theta)?;
    if !(rademacher >= 0.0) {
        return Err(Error::argument(format!("Rademacher complexity must be nonnegative, got {rademacher}")));
    }
    let lead = (32.0 * l * l * eta * eta * psi / (gamma * gamma * sigma)).sqrt() * step_factor(c, l, b);
    Ok(lead + 4.0 * rademacher + confidence(inputs.n, inputs.delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorollaryKind {
    /// ℓq potential with dual exponent `p ∈ [2, ∞)`; needs `L, C, W, B, q`.
    Pq,
    /// ℓq potential tuned to dimension, ℓ1/ℓ∞ pair; needs `L, C, W, B, d`.
    Global,
    /// Negative entropy on the simplex; needs `L, C, B, d`.
    Simplex,
}

pub fn bound_corollary(kind: CorollaryKind, inputs: &BoundInputs) -> Result<f64> {
    inputs.common()?;
    let (n, delta) = (inputs.n, inputs.delta);
    let l = need("L", inputs.l)?;
    let c = need("C", inputs.c)?;
    let b = need("B", inputs.b)?;
    let conf = confidence(n, delta);
    Ok(match kind {
        CorollaryKind::Pq => {
            let w = need("W", inputs.w)?;
            let q1 = need_q(inputs.q)? - 1.0;
            let first = 4.0 * l * w * c / q1 * (((2.0 * (4.0 / delta).ln() * q1).sqrt() + 1.0) / n.sqrt())
                * step_factor(c, l, b);
            let second = 4.0 * c * w / (n * q1).sqrt() * (1.0 + 1.0 / q1.sqrt());
            first + second + conf
        }
        CorollaryKind::Global => {
            let w = need("W", inputs.w)?;
            let d = need_dim(inputs.d)?;
            let s = (3.0 * d.ln()).sqrt();
            let k = c * c * l * b;
            4.0 * c * w * (1.0 + s).powi(2) / n.sqrt()
                + conf
                + 12.0 * l * c * w * s * (2.0 * k + 1.0) / k * ((4.0 * d / delta).ln() / n).sqrt()
        }
        CorollaryKind::Simplex => {
            let d = need_dim(inputs.d)?;
            let k = c * c * l * b;
            4.0 * c * (2.0 * d.ln() / n).sqrt()
                + conf
                + 3.0 * l * c * (32.0 * d.ln()).sqrt() * (2.0 * k + 1.0) / k * ((4.0 * d / delta).ln() / n).sqrt()
        }
    })
}

fn need_dim(d: Option<f64>) -> Result<f64> {
    let d = d.ok_or_else(|| Error::argument("missing bound parameter d"))?;
    if d >= 2.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::argument(format!("dimension must be at least 2, got {d}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher_linear(1.0, 1.0, 1.0, 2.0), 1.0);
        assert_eq!(rademacher_linear(2.0, 3.0, 4.0, 8.0), 1.5);
    }

    #[test]
    fn eta_zero_scale() {
        assert_eq!(eta_bound(0.0, 100.0, 0.1, EtaRegime::PIn2Inf { q: 1.5 }).unwrap(), 0.0);
        assert!(eta_bound(1.0, 100.0, 1.5, EtaRegime::Infinity { d: 10.0 }).is_err());
    }

    #[test]
    fn general_bound_reduces_to_confidence_term() {
        let mut inp = BoundInputs::new(1000.0, 0.05);
        inp.l = Some(0.25);
        inp.c = Some(1.0);
        inp.b = Some(1.0);
        inp.sigma = Some(1.0);
        inp.gamma = Some(0.05);
        inp.eta = Some(0.0);
        inp.psi_theta = Some(1.0);
        let v = bound_theorem4(&inp, 0.0).unwrap();
        assert_eq!(v, (8.0 * 20.0f64.ln() / 1000.0).sqrt());
    }

    #[test]
    fn missing_parameters_are_reported() {
        let inp = BoundInputs { l: Some(0.25), c: Some(1.0), b: Some(1.0), ..BoundInputs::new(100.0, 0.05) };
        for kind in [CorollaryKind::Pq, CorollaryKind::Global, CorollaryKind::Simplex] {
            let err = bound_corollary(kind, &inp).unwrap_err();
            assert!(matches!(err, Error::Argument(_)), "{kind:?}");
        }
    }
}
