//! Small dense kernels shared by the training loops.
//!
//! `dot` uses eight independent accumulators so the compiler can vectorize it;
//! every code path that must agree bitwise (the GLM-tron reduction, for one)
//! goes through these functions rather than nalgebra's own reductions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Inner product with a fixed eight-lane accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// ℓp norm for `p >= 1` (including `f64::INFINITY`).
///
/// For exponents other than 1 and 2 the entries are scaled by the largest
/// magnitude first, so large `p` neither overflows nor underflows.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return l1_norm(v);
    }
    if p == 2.0 {
        return l2_norm(v);
    }
    let m = linf_norm(v);
    if p.is_infinite() || m == 0.0 {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Hölder conjugate `q / (q - 1)`.
pub fn conjugate_exponent(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// Thin singular value decomposition `M = U·diag(s)·Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    pub fn recompose(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[j];
        }
        us * &self.v_t
    }
}

const SVD_CHECK_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 60;

/// SVD with a reconstruction check.
///
/// nalgebra's Golub-Kahan routine occasionally returns factors that do not
/// reproduce the input when it has exactly repeated zero singular values, which
/// is the normal state of a matrix that has just been projected onto a nuclear
/// norm ball. The result is verified and, on a mismatch, recomputed with
/// one-sided Jacobi rotations. Singular values are not sorted.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric { message: "SVD of a non-finite matrix".into(), residual: f64::NAN });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if let Some(d) = m.clone().try_svd(true, true, f64::EPSILON, 0) {
        let out = Svd { u: d.u.expect("requested"), s: d.singular_values, v_t: d.v_t.expect("requested") };
        if (out.recompose() - m).amax() <= SVD_CHECK_TOL * scale {
            return Ok(out);
        }
    }
    let out = jacobi_svd(m)?;
    let residual = (out.recompose() - m).amax() / scale;
    if residual > SVD_CHECK_TOL {
        return Err(Error::Numeric { message: "SVD failed its reconstruction check".into(), residual });
    }
    Ok(out)
}

/// Singular values through [`svd`].
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(svd(m)?.s)
}

fn jacobi_svd(m: &DMatrix<f64>) -> Result<Svd> {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.transpose())?;
        return Ok(Svd { u: t.v_t.transpose(), s: t.s, v_t: t.u.transpose() });
    }
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (a.column(p), a.column(q));
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            let s = DVector::from_fn(cols, |j, _| a.column(j).norm());
            let mut u = DMatrix::<f64>::zeros(rows, cols);
            for j in 0..cols {
                if s[j] > 0.0 {
                    u.set_column(j, &(a.column(j) / s[j]));
                }
            }
            complete_orthonormal(&mut u, &s);
            return Ok(Svd { u, s, v_t: v.transpose() });
        }
    }
    Err(Error::Numeric { message: "Jacobi SVD did not converge".into(), residual: f64::NAN })
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Fills the columns of `u` belonging to zero singular values with an
/// orthonormal complement of the others.
fn complete_orthonormal(u: &mut DMatrix<f64>, s: &DVector<f64>) {
    let rows = u.nrows();
    let mut basis = 0;
    for j in 0..u.ncols() {
        if s[j] > 0.0 {
            continue;
        }
        while basis < rows {
            let mut cand = DVector::<f64>::zeros(rows);
            cand[basis] = 1.0;
            basis += 1;
            for k in 0..u.ncols() {
                if k != j && (s[k] > 0.0 || k < j) {
                    let col = u.column(k);
                    let proj = col.dot(&cand);
                    cand -= col * proj;
                }
            }
            let n = cand.norm();
            if n > 1e-8 {
                u.set_column(j, &(cand / n));
                break;
            }
        }
    }
}
