//! Mirror maps (potentials), their gradients and inverses, and Bregman divergences.
//!
//! Every potential is normalized so that its minimum over the domain is zero:
//!
//! | kind         | ψ(w)                                            | ∇ψ(w)                  | (∇ψ)⁻¹(z)          | σ      | norm pair |
//! |--------------|-------------------------------------------------|------------------------|--------------------|--------|-----------|
//! | `Euclidean`  | ½‖w‖₂²                                          | w                      | z                  | 1      | ℓ2 / ℓ2   |
//! | `PNorm(q)`   | ½‖w‖_q²                                         | ‖w‖_q^{2−q} sgn(w)\|w\|^{q−1} | same form, exponent q/(q−1) | q − 1 | ℓq / ℓp |
//! | `Hypentropy(β)` | Σ w·asinh(w/β) − √(w²+β²) + β                | asinh(w/β)             | β·sinh(z)          | n/a    | ℓ1 / ℓ∞   |
//! | `NegEntropy(u)` | Σ w·log(w/u) − w + u                          | log(w/u)               | u·exp(z)           | 1 (on the simplex) | ℓ1 / ℓ∞ |
//!
//! The hypentropy potential carries no strong-convexity constant; step-size
//! rules that need one require an explicit override via
//! [`Potential::with_strong_convexity`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_exponent, dot, l1_norm, l2_norm, linf_norm, lp_norm};

/// Smallest admissible p-norm exponent; anything in `(1, MIN_Q)` is raised to it.
pub const MIN_Q: f64 = 1.0 + 1e-6;

/// Lower clamp applied inside logarithms of the negative entropy.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Euclidean,
    PNorm { q: f64 },
    Hypentropy { beta: f64 },
    NegEntropy { reference: DVector<f64> },
}

/// Primal/dual norm pair in which a potential's strong convexity is stated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormPair {
    /// ℓ2 primal, ℓ2 dual.
    L2L2,
    /// ℓq primal, ℓp dual with 1/p + 1/q = 1.
    LqLp { q: f64 },
    /// ℓ1 primal, ℓ∞ dual.
    L1LInf,
}

impl NormPair {
    pub fn primal_norm(&self, v: &[f64]) -> f64 {
        match *self {
            NormPair::L2L2 => l2_norm(v),
            NormPair::LqLp { q } => lp_norm(v, q),
            NormPair::L1LInf => l1_norm(v),
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match *self {
            NormPair::L2L2 => l2_norm(v),
            NormPair::LqLp { q } => lp_norm(v, conjugate_exponent(q)),
            NormPair::L1LInf => linf_norm(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    strong_convexity: Option<f64>,
    norm_pair: NormPair,
}

impl Potential {
    pub fn euclidean() -> Self {
        Potential {
            kind: PotentialKind::Euclidean,
            strong_convexity: Some(1.0),
            norm_pair: NormPair::L2L2,
        }
    }

    /// `½‖w‖_q²`, which is `(q − 1)`-strongly convex with respect to `‖·‖_q`.
    pub fn pnorm(q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= 2.0) {
            return Err(Error::argument(format!("p-norm exponent must lie in (1, 2], got {q}")));
        }
        let q = q.max(MIN_Q);
        Ok(Potential {
            kind: PotentialKind::PNorm { q },
            strong_convexity: Some(q - 1.0),
            norm_pair: NormPair::LqLp { q },
        })
    }

    pub fn hypentropy(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::argument(format!("hypentropy beta must be positive, got {beta}")));
        }
        Ok(Potential {
            kind: PotentialKind::Hypentropy { beta },
            strong_convexity: None,
            norm_pair: NormPair::L1LInf,
        })
    }

    /// Negative entropy relative to a strictly positive probability vector.
    pub fn negentropy(reference: DVector<f64>) -> Result<Self> {
        if reference.is_empty() || reference.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(Error::argument("negentropy reference must be strictly positive"));
        }
        let total: f64 = reference.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::argument(format!("negentropy reference must sum to 1, sums to {total}")));
        }
        Ok(Potential {
            kind: PotentialKind::NegEntropy { reference },
            strong_convexity: Some(1.0),
            norm_pair: NormPair::L1LInf,
        })
    }

    /// Negative entropy relative to the uniform distribution on `d` atoms.
    pub fn negentropy_uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::argument("dimension must be positive"));
        }
        Self::negentropy(DVector::from_element(d, 1.0 / d as f64))
    }

    /// Supply (or replace) the strong-convexity constant used by step-size rules.
    pub fn with_strong_convexity(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::argument(format!("strong convexity must be positive, got {sigma}")));
        }
        self.strong_convexity = Some(sigma);
        Ok(self)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity
    }

    pub fn norm_pair(&self) -> NormPair {
        self.norm_pair
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Euclidean => "euclidean",
            PotentialKind::PNorm { .. } => "pnorm",
            PotentialKind::Hypentropy { .. } => "hypentropy",
            PotentialKind::NegEntropy { .. } => "negentropy",
        }
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!("non-finite coordinate {i}")));
        }
        if let PotentialKind::NegEntropy { reference } = &self.kind {
            if reference.len() != w.len() {
                return Err(Error::argument(format!(
                    "dimension mismatch: reference has {} entries, point has {}",
                    reference.len(),
                    w.len()
                )));
            }
            if let Some(i) = w.iter().position(|&x| x <= 0.0) {
                return Err(Error::domain(format!(
                    "negentropy requires strictly positive coordinates; entry {i} is {}",
                    w[i]
                )));
            }
        }
        Ok(())
    }

    /// ψ(w), normalized so that the minimum over the domain is zero.
    pub fn value(&self, w: &DVector<f64>) -> Result<f64> {
        let w = w.as_slice();
        self.check(w)?;
        Ok(match &self.kind {
            PotentialKind::Euclidean => 0.5 * dot(w, w),
            PotentialKind::PNorm { q } => {
                let n = lp_norm(w, *q);
                0.5 * n * n
            }
            PotentialKind::Hypentropy { beta } => w
                .iter()
                .map(|&x| {
                    let r = x.hypot(*beta);
                    // √(x²+β²) − β without cancellation
                    x * (x / beta).asinh() - x * x / (r + beta)
                })
                .sum(),
            PotentialKind::NegEntropy { reference } => w
                .iter()
                .zip(reference.iter())
                .map(|(&x, &u)| x * (x.max(LOG_FLOOR) / u).ln() - x + u)
                .sum(),
        })
    }

    pub fn gradient(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(w.as_slice())?;
        Ok(match &self.kind {
            PotentialKind::Euclidean => w.clone(),
            PotentialKind::PNorm { q } => power_map(w, *q),
            PotentialKind::Hypentropy { beta } => w.map(|x| (x / beta).asinh()),
            PotentialKind::NegEntropy { reference } => {
                w.zip_map(reference, |x, u| (x.max(LOG_FLOOR) / u).ln())
            }
        })
    }

    /// `(∇ψ)⁻¹(z) = ∇ψ*(z)`, closed form for every supported potential.
    pub fn gradient_inverse(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(i) = z.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                message: format!("non-finite dual coordinate {i}"),
                residual: f64::INFINITY,
            });
        }
        let w = match &self.kind {
            PotentialKind::Euclidean => z.clone(),
            PotentialKind::PNorm { q } => power_map(z, conjugate_exponent(*q)),
            PotentialKind::Hypentropy { beta } => z.map(|s| beta * s.sinh()),
            PotentialKind::NegEntropy { reference } => {
                if reference.len() != z.len() {
                    return Err(Error::argument("dimension mismatch with negentropy reference"));
                }
                z.zip_map(reference, |s, u| u * s.exp())
            }
        };
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                message: format!("inverse mirror map overflowed at coordinate {i} (dual value {})", z[i]),
                residual: f64::INFINITY,
            });
        }
        Ok(w)
    }

    /// Bregman divergence `D_ψ(x, y) = ψ(x) − ψ(y) − ⟨∇ψ(y), x − y⟩`.
    ///
    /// Evaluated in a per-coordinate closed form where one exists, and clamped
    /// at zero so rounding never reports a negative divergence.
    pub fn divergence(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::argument("dimension mismatch"));
        }
        self.check(x.as_slice())?;
        self.check(y.as_slice())?;
        let d = match &self.kind {
            PotentialKind::Euclidean => 0.5 * x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            PotentialKind::PNorm { .. } => {
                let g = self.gradient(y)?;
                let diff = x - y;
                self.value(x)? - self.value(y)? - dot(g.as_slice(), diff.as_slice())
            }
            PotentialKind::Hypentropy { beta } => x
                .iter()
                .zip(y.iter())
                .map(|(&a, &b)| {
                    let ra = a.hypot(*beta);
                    let rb = b.hypot(*beta);
                    a * ((a / beta).asinh() - (b / beta).asinh()) - (ra - rb)
                })
                .sum(),
            PotentialKind::NegEntropy { .. } => x
                .iter()
                .zip(y.iter())
                .map(|(&a, &b)| a * (a.max(LOG_FLOOR) / b.max(LOG_FLOOR)).ln() - a + b)
                .sum(),
        };
        Ok(d.max(0.0))
    }

    /// Fenchel conjugate ψ*(z).
    pub fn conjugate_value(&self, z: &DVector<f64>) -> Result<f64> {
        Ok(match &self.kind {
            PotentialKind::Euclidean => 0.5 * dot(z.as_slice(), z.as_slice()),
            PotentialKind::PNorm { q } => {
                let n = lp_norm(z.as_slice(), conjugate_exponent(*q));
                0.5 * n * n
            }
            PotentialKind::Hypentropy { beta } => z
                .iter()
                .map(|&s| {
                    let h = (0.5 * s).sinh();
                    2.0 * beta * h * h
                })
                .sum(),
            PotentialKind::NegEntropy { reference } => {
                if reference.len() != z.len() {
                    return Err(Error::argument("dimension mismatch with negentropy reference"));
                }
                z.iter().zip(reference.iter()).map(|(&s, &u)| u * s.exp_m1()).sum()
            }
        })
    }

    /// Divergence of the conjugate, `D_ψ*(a, b)`, with `∇ψ*` taken as the inverse mirror map.
    pub fn dual_divergence(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::argument("dimension mismatch"));
        }
        let gb = self.gradient_inverse(b)?;
        let diff = a - b;
        let d = self.conjugate_value(a)? - self.conjugate_value(b)? - dot(gb.as_slice(), diff.as_slice());
        Ok(d.max(0.0))
    }

    /// Norm in which the strong-convexity constant is stated.
    pub fn primal_norm(&self, v: &[f64]) -> f64 {
        self.norm_pair.primal_norm(v)
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        self.norm_pair.dual_norm(v)
    }

    /// Minimizer of ψ over its domain (the zero vector, or the reference distribution).
    pub fn minimizer(&self, dim: usize) -> Result<DVector<f64>> {
        match &self.kind {
            PotentialKind::NegEntropy { reference } => {
                if reference.len() != dim {
                    return Err(Error::argument("dimension mismatch with negentropy reference"));
                }
                Ok(reference.clone())
            }
            _ => Ok(DVector::zeros(dim)),
        }
    }
}

/// Gradient of `½‖v‖_r²`: `‖v‖_r · sgn(v) · (|v| / ‖v‖_r)^{r−1}`.
fn power_map(v: &DVector<f64>, r: f64) -> DVector<f64> {
    let n = lp_norm(v.as_slice(), r);
    if n == 0.0 {
        return DVector::zeros(v.len());
    }
    v.map(|x| n * x.signum() * (x.abs() / n).powf(r - 1.0))
}

/// A primal point together with its image under the mirror map.
#[derive(Debug, Clone, PartialEq)]
pub struct BregmanPair {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
}

impl BregmanPair {
    pub fn from_primal(psi: &Potential, primal: DVector<f64>) -> Result<Self> {
        let dual = psi.gradient(&primal)?;
        Ok(BregmanPair { primal, dual })
    }

    pub fn from_dual(psi: &Potential, dual: DVector<f64>) -> Result<Self> {
        let primal = psi.gradient_inverse(&dual)?;
        Ok(BregmanPair { primal, dual })
    }

    /// Sup-norm distance between `primal` and the inverse image of `dual`.
    pub fn roundtrip_error(&self, psi: &Potential) -> Result<f64> {
        let back = psi.gradient_inverse(&self.dual)?;
        Ok(linf_norm((back - &self.primal).as_slice()))
    }
}
