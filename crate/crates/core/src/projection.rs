//! Constraint sets and Bregman projections onto them.
//!
//! Only pairings with an exact (or bisection-exact) projection are provided;
//! [`bregman_project`] reports anything else as [`Error::Unsupported`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Potential, PotentialKind};
use crate::linalg::{l1_norm, lp_norm, singular_values, svd};

/// Absolute tolerance on `‖s_θ(y)‖₁ − R` at which the hypentropy bisection stops.
pub const BISECTION_TOL: f64 = 1e-8;
pub const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSet {
    Unconstrained,
    L1Ball { radius: f64 },
    LpBall { p: f64, radius: f64 },
    Simplex,
    SpectralL1 { radius: f64 },
    SpectralLp { p: f64, radius: f64 },
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        let check_r = |r: f64| {
            if r > 0.0 && r.is_finite() {
                Ok(())
            } else {
                Err(Error::argument(format!("constraint radius must be positive, got {r}")))
            }
        };
        let check_p = |p: f64| {
            if p > 1.0 && p <= 2.0 {
                Ok(())
            } else {
                Err(Error::argument(format!("ball exponent must lie in (1, 2], got {p}")))
            }
        };
        match *self {
            ConstraintSet::Unconstrained | ConstraintSet::Simplex => Ok(()),
            ConstraintSet::L1Ball { radius } | ConstraintSet::SpectralL1 { radius } => check_r(radius),
            ConstraintSet::LpBall { p, radius } | ConstraintSet::SpectralLp { p, radius } => {
                check_p(p)?;
                check_r(radius)
            }
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, ConstraintSet::SpectralL1 { .. } | ConstraintSet::SpectralLp { .. })
    }

    /// The vector set a spectral set imposes on singular values; other sets map to themselves.
    pub fn vector_analog(&self) -> ConstraintSet {
        match *self {
            ConstraintSet::SpectralL1 { radius } => ConstraintSet::L1Ball { radius },
            ConstraintSet::SpectralLp { p, radius } => ConstraintSet::LpBall { p, radius },
            other => other,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            ConstraintSet::L1Ball { radius }
            | ConstraintSet::LpBall { radius, .. }
            | ConstraintSet::SpectralL1 { radius }
            | ConstraintSet::SpectralLp { radius, .. } => Some(radius),
            _ => None,
        }
    }

    /// Membership test for vectors with slack `tol`. Spectral sets treat the
    /// vector as a list of singular values.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match *self {
            ConstraintSet::Unconstrained => true,
            ConstraintSet::L1Ball { radius } | ConstraintSet::SpectralL1 { radius } => l1_norm(v) <= radius + tol,
            ConstraintSet::LpBall { p, radius } | ConstraintSet::SpectralLp { p, radius } => {
                lp_norm(v, p) <= radius + tol
            }
            ConstraintSet::Simplex => {
                v.iter().all(|&x| x >= -tol) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    /// Membership test for matrices: spectral sets look at singular values,
    /// every other set at the column-major entries.
    pub fn contains_matrix(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        if self.is_spectral() {
            match singular_values(m) {
                Ok(s) => self.contains(s.as_slice(), tol),
                Err(_) => false,
            }
        } else {
            self.contains(m.as_slice(), tol)
        }
    }
}

/// Euclidean projection onto `{x : ‖x‖₁ ≤ R}` by sort-and-threshold.
pub fn project_l1_euclidean(y: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    ConstraintSet::L1Ball { radius }.validate()?;
    if l1_norm(y.as_slice()) <= radius {
        return Ok(y.clone());
    }
    let tau = l1_threshold(y.as_slice(), radius);
    Ok(y.map(|x| x.signum() * (x.abs() - tau).max(0.0)))
}

/// Soft threshold τ with `Σ max(|y_i| − τ, 0) = R`, for `‖y‖₁ > R`.
fn l1_threshold(y: &[f64], radius: f64) -> f64 {
    let mut u: Vec<f64> = y.iter().map(|x| x.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    tau
}

/// Radial rescaling onto `{x : ‖x‖_p ≤ R}`, which is the Bregman projection
/// under `½‖·‖_p²` (and the Euclidean projection when `p = 2`).
pub fn project_lp_radial(p: f64, y: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    ConstraintSet::LpBall { p, radius }.validate()?;
    let n = lp_norm(y.as_slice(), p);
    if n <= radius {
        Ok(y.clone())
    } else {
        Ok(y * (radius / n))
    }
}

/// Elementwise shrinkage `sgn(x)·max{θ(r + |x|)/2 − (r − |x|)/(2θ), 0}` with `r = √(x² + β²)`.
///
/// At `θ = 1` this is the identity; `‖s_θ(x)‖₁` is nondecreasing in θ.
pub fn hypentropy_shrinkage(theta: f64, beta: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::argument(format!("shrinkage parameter must lie in (0, 1], got {theta}")));
    }
    if !(beta > 0.0) {
        return Err(Error::argument(format!("beta must be positive, got {beta}")));
    }
    if theta == 1.0 {
        return Ok(x.clone());
    }
    Ok(x.map(|v| shrink(theta, v.abs(), v.abs().hypot(beta), beta * beta) * v.signum_or_zero()))
}

#[inline]
fn shrink(theta: f64, a: f64, r: f64, beta2: f64) -> f64 {
    // θ(r+a)/2 − (r−a)/(2θ); r − a is formed as β²/(r + a) to avoid cancellation
    (0.5 * theta * (r + a) - 0.5 * (beta2 / (r + a)) / theta).max(0.0)
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    #[inline]
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Bregman projection under the hypentropy potential onto `{x : ‖x‖₁ ≤ R}`.
///
/// Bisects on θ ∈ (0, 1] until `|‖s_θ(y)‖₁ − R| ≤ 1e-8` with the result on the
/// feasible side, or 200 halvings have been made.
pub fn project_l1_hypentropy(beta: f64, y: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    ConstraintSet::L1Ball { radius }.validate()?;
    if !(beta > 0.0) {
        return Err(Error::argument(format!("beta must be positive, got {beta}")));
    }
    let total = l1_norm(y.as_slice());
    if total <= radius {
        return Ok(y.clone());
    }
    let a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let r: Vec<f64> = a.iter().map(|&v| v.hypot(beta)).collect();
    let b2 = beta * beta;
    let mass = |theta: f64| -> f64 { a.iter().zip(&r).map(|(&ai, &ri)| shrink(theta, ai, ri, b2)).sum() };

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut lo_mass, hi_mass) = (0.0, total);
    if !(lo_mass < radius && hi_mass > radius) {
        return Err(Error::Internal(format!(
            "hypentropy bisection not bracketed: mass(0)={lo_mass}, mass(1)={hi_mass}, R={radius}"
        )));
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = mass(mid);
        if m <= radius {
            lo = mid;
            lo_mass = m;
            if radius - m <= BISECTION_TOL {
                break;
            }
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::Numeric {
            message: "hypentropy bisection never reached the feasible side".into(),
            residual: radius - lo_mass,
        });
    }
    Ok(DVector::from_iterator(
        y.len(),
        y.iter().zip(a.iter().zip(&r)).map(|(&v, (&ai, &ri))| v.signum_or_zero() * shrink(lo, ai, ri, b2)),
    ))
}

/// KL projection of a positive vector onto the probability simplex.
pub fn project_simplex_kl(y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.is_empty() {
        return Err(Error::argument("empty vector"));
    }
    if let Some(i) = y.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("simplex projection needs positive entries; entry {i} is {}", y[i])));
    }
    let s: f64 = y.iter().sum();
    Ok(y / s)
}

/// Vector projection selected by potential and set, applied to singular values
/// or plain vectors alike.
fn project_vector(psi: &Potential, set: &ConstraintSet, y: &DVector<f64>) -> Result<DVector<f64>> {
    use ConstraintSet as C;
    use PotentialKind as K;
    match (psi.kind(), *set) {
        (_, C::Unconstrained) => Ok(y.clone()),
        (K::Euclidean, C::L1Ball { radius } | C::SpectralL1 { radius }) => project_l1_euclidean(y, radius),
        (K::Hypentropy { beta }, C::L1Ball { radius } | C::SpectralL1 { radius }) => {
            project_l1_hypentropy(*beta, y, radius)
        }
        (K::PNorm { q }, C::LpBall { p, radius } | C::SpectralLp { p, radius }) if exponents_match(*q, p) => {
            project_lp_radial(p, y, radius)
        }
        (K::Euclidean, C::LpBall { p, radius } | C::SpectralLp { p, radius }) if p == 2.0 => {
            project_lp_radial(p, y, radius)
        }
        (K::NegEntropy { .. }, C::Simplex) => project_simplex_kl(y),
        (_, s) => Err(Error::unsupported(format!("no Bregman projection for {} potential onto {s:?}", psi.name()))),
    }
}

fn exponents_match(q: f64, p: f64) -> bool {
    // the potential floors q at 1 + 1e-6, so compare loosely
    (q - p).abs() <= 1e-6
}

/// Bregman projection of `y` under `psi` onto `set`.
///
/// Spectral sets are rejected here; use [`project_spectral`] on matrices.
pub fn bregman_project(psi: &Potential, set: &ConstraintSet, y: &DVector<f64>) -> Result<DVector<f64>> {
    set.validate()?;
    if set.is_spectral() {
        return Err(Error::argument("spectral constraint sets apply to matrices; use project_spectral"));
    }
    project_vector(psi, set, y)
}

/// Projects a matrix by applying the matching vector projection to its singular values.
pub fn project_spectral(set: &ConstraintSet, m: &DMatrix<f64>, psi: &Potential) -> Result<DMatrix<f64>> {
    set.validate()?;
    if !set.is_spectral() {
        return Err(Error::argument(format!("{set:?} is not a spectral constraint")));
    }
    let d = svd(m)?;
    if set.contains(d.s.as_slice(), 0.0) {
        return Ok(m.clone());
    }
    let s = project_vector(psi, set, &d.s)?;
    Ok(recompose(&d.u, &s, &d.v_t))
}

/// `U · diag(s) · Vᵀ`
pub fn recompose(u: &DMatrix<f64>, s: &DVector<f64>, v_t: &DMatrix<f64>) -> DMatrix<f64> {
    let mut us = u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= s[j];
    }
    us * v_t
}
