use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;

use reflectron::geometry::{BregmanPair, NormPair, Potential, PotentialKind};
use reflectron::linalg::{l1_norm, lp_norm};
use reflectron::Error;

fn vector(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 1..=max_dim)
}

fn positive(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..3.0f64, 1..=max_dim)
}

fn potential() -> impl Strategy<Value = Potential> {
    prop_oneof![
        Just(Potential::euclidean()),
        (1.05..=2.0f64).prop_map(|q| Potential::pnorm(q).unwrap()),
        (0.01..2.0f64).prop_map(|b| Potential::hypentropy(b).unwrap()),
    ]
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn normalized(xs: &[f64]) -> DVector<f64> {
    let s: f64 = xs.iter().sum();
    DVector::from_iterator(xs.len(), xs.iter().map(|x| x / s))
}

/// Central difference of ψ along coordinate `i`, step relative to the coordinate.
fn fd(psi: &Potential, w: &DVector<f64>, i: usize, h: f64) -> f64 {
    let mut a = w.clone();
    let mut b = w.clone();
    a[i] += h;
    b[i] -= h;
    (psi.value(&a).unwrap() - psi.value(&b).unwrap()) / (2.0 * h)
}

#[test]
fn euclidean_examples() {
    let psi = Potential::euclidean();
    assert_eq!(psi.value(&v(&[3.0, 4.0])).unwrap(), 12.5);
    assert_eq!(psi.gradient(&v(&[1.0, -2.0])).unwrap(), v(&[1.0, -2.0]));
    assert_eq!(psi.divergence(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 1.0);
    assert_eq!(psi.strong_convexity(), Some(1.0));
    assert_eq!(psi.norm_pair(), NormPair::L2L2);
}

#[test]
fn pnorm_at_two_is_euclidean() {
    let p = Potential::pnorm(2.0).unwrap();
    let e = Potential::euclidean();
    let w = v(&[0.3, -1.2, 2.0]);
    assert_relative_eq!(p.value(&w).unwrap(), e.value(&w).unwrap(), epsilon = 1e-14);
    assert_relative_eq!(p.gradient(&w).unwrap(), e.gradient(&w).unwrap(), epsilon = 1e-14);
}

#[test]
fn pnorm_rejects_out_of_range_exponents() {
    for q in [1.0, 0.5, 2.5, f64::NAN] {
        assert!(matches!(Potential::pnorm(q), Err(Error::Argument(_))), "q = {q}");
    }
    assert_relative_eq!(Potential::pnorm(1.5).unwrap().strong_convexity().unwrap(), 0.5);
}

#[test]
fn hypentropy_is_zero_at_origin_and_has_no_modulus() {
    let psi = Potential::hypentropy(0.3).unwrap();
    assert_eq!(psi.value(&DVector::zeros(7)).unwrap(), 0.0);
    assert_eq!(psi.strong_convexity(), None);
    assert_eq!(psi.norm_pair(), NormPair::L1LInf);
    let g = psi.gradient(&v(&[0.3, -0.6])).unwrap();
    assert_relative_eq!(g[0], 1.0f64.asinh(), epsilon = 1e-15);
    assert_relative_eq!(g[1], (-2.0f64).asinh(), epsilon = 1e-15);
    assert!(Potential::hypentropy(0.0).is_err());
    assert!(Potential::hypentropy(-1.0).is_err());
}

#[test]
fn hypentropy_approaches_quadratic_for_large_beta() {
    let beta = 1e6;
    let psi = Potential::hypentropy(beta).unwrap();
    let w = v(&[1.0, -2.0]);
    // ψ ≈ ‖w‖² / (2β) for |w| ≪ β
    assert_relative_eq!(psi.value(&w).unwrap() * beta, 2.5, max_relative = 1e-6);
}

#[test]
fn negentropy_domain_and_minimum() {
    let psi = Potential::negentropy_uniform(4).unwrap();
    let u = DVector::from_element(4, 0.25);
    assert_eq!(psi.minimizer(4).unwrap(), u);
    assert!(psi.value(&u).unwrap().abs() < 1e-15);
    assert!(matches!(psi.value(&v(&[0.5, 0.5, 0.0, 0.0])), Err(Error::Domain(_))));
    assert!(matches!(psi.gradient(&v(&[0.5, -0.5, 0.5, 0.5])), Err(Error::Domain(_))));
    assert!(Potential::negentropy(v(&[0.5, 0.6])).is_err());
    assert!(Potential::negentropy(v(&[1.0, 0.0])).is_err());
}

#[test]
fn inverse_overflow_is_a_numeric_error() {
    let psi = Potential::hypentropy(1.0).unwrap();
    assert!(matches!(psi.gradient_inverse(&v(&[1e4])), Err(Error::Numeric { .. })));
    let ent = Potential::negentropy_uniform(1).unwrap();
    assert!(matches!(ent.gradient_inverse(&v(&[1e4])), Err(Error::Numeric { .. })));
}

#[test]
fn bregman_pair_roundtrip() {
    let psi = Potential::pnorm(1.3).unwrap();
    let pair = BregmanPair::from_primal(&psi, v(&[0.2, -1.0, 0.7])).unwrap();
    assert!(pair.roundtrip_error(&psi).unwrap() < 1e-12);
    let back = BregmanPair::from_dual(&psi, pair.dual.clone()).unwrap();
    assert_relative_eq!(back.primal, pair.primal, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gradient_matches_finite_differences(psi in potential(), w in vector(6)) {
        let g = psi.gradient(&DVector::from_vec(w.clone())).unwrap();
        let w = DVector::from_vec(w);
        let offset = match psi.kind() {
            PotentialKind::Hypentropy { beta } => *beta,
            PotentialKind::Euclidean => 1.0,
            _ => 0.0,
        };
        for i in 0..w.len() {
            prop_assume!(w[i].abs() > 1e-3);
            let h = 1e-5 * (w[i].abs() + offset);
            let num = fd(&psi, &w, i, h);
            prop_assert!((num - g[i]).abs() <= 1e-5 * g.amax().max(1e-3), "coord {i}: fd {num} vs {}", g[i]);
        }
    }

    #[test]
    fn mirror_maps_are_mutually_inverse(psi in potential(), w in vector(6), z in vector(6)) {
        let w = DVector::from_vec(w);
        let back = psi.gradient_inverse(&psi.gradient(&w).unwrap()).unwrap();
        prop_assert!((&back - &w).amax() <= 1e-10 * w.amax().max(1.0));
        let z = DVector::from_vec(z);
        let forth = psi.gradient(&psi.gradient_inverse(&z).unwrap()).unwrap();
        prop_assert!((&forth - &z).amax() <= 1e-10 * z.amax().max(1.0));
    }

    #[test]
    fn divergence_is_nonnegative_and_vanishes_on_the_diagonal(psi in potential(), x in vector(5), y in vector(5)) {
        let n = x.len().min(y.len());
        let (x, y) = (v(&x[..n]), v(&y[..n]));
        prop_assert!(psi.divergence(&x, &y).unwrap() >= 0.0);
        prop_assert!(psi.divergence(&x, &x).unwrap() <= 1e-12 * (1.0 + psi.value(&x).unwrap()));
    }

    #[test]
    fn three_point_identity(psi in potential(), x in vector(4), y in vector(4), z in vector(4)) {
        let n = x.len().min(y.len()).min(z.len());
        let (x, y, z) = (v(&x[..n]), v(&y[..n]), v(&z[..n]));
        let lhs = psi.divergence(&x, &y).unwrap() + psi.divergence(&y, &z).unwrap() - psi.divergence(&x, &z).unwrap();
        let rhs = (psi.gradient(&z).unwrap() - psi.gradient(&y).unwrap()).dot(&(&x - &y));
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn divergence_duality(psi in potential(), x in vector(5), y in vector(5)) {
        let n = x.len().min(y.len());
        let (x, y) = (v(&x[..n]), v(&y[..n]));
        let primal = psi.divergence(&x, &y).unwrap();
        let dual = psi.dual_divergence(&psi.gradient(&y).unwrap(), &psi.gradient(&x).unwrap()).unwrap();
        prop_assert!((primal - dual).abs() <= 1e-9 * (1.0 + primal));
    }

    #[test]
    fn strong_convexity_in_the_declared_norm(psi in potential(), x in vector(5), y in vector(5)) {
        let n = x.len().min(y.len());
        let (x, y) = (v(&x[..n]), v(&y[..n]));
        let diff = (&x - &y).as_slice().to_vec();
        let d = psi.divergence(&x, &y).unwrap();
        let lower = match psi.kind() {
            PotentialKind::Hypentropy { beta } => {
                // ℓ1 modulus 1/(B + dβ) on the ℓ1 ball of radius B
                let b = l1_norm(x.as_slice()).max(l1_norm(y.as_slice()));
                0.5 * l1_norm(&diff).powi(2) / (b + n as f64 * beta)
            }
            _ => 0.5 * psi.strong_convexity().unwrap() * psi.primal_norm(&diff).powi(2),
        };
        prop_assert!(d >= lower - 1e-10 * (1.0 + d));
    }

    #[test]
    fn negentropy_divergence_is_kl_on_the_simplex(x in positive(6), y in positive(6)) {
        let n = x.len().min(y.len());
        let (x, y) = (normalized(&x[..n]), normalized(&y[..n]));
        let psi = Potential::negentropy_uniform(n).unwrap();
        let kl: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * (a / b).ln()).sum();
        prop_assert!((psi.divergence(&x, &y).unwrap() - kl).abs() <= 1e-12);
        let tv = l1_norm((&x - &y).as_slice());
        prop_assert!(kl >= 0.5 * tv * tv - 1e-12);
    }

    #[test]
    fn negentropy_gradient_and_roundtrip(w in positive(6)) {
        let n = w.len();
        let psi = Potential::negentropy_uniform(n).unwrap();
        let w = DVector::from_vec(w);
        let g = psi.gradient(&w).unwrap();
        for i in 0..n {
            let h = 1e-5 * w[i];
            prop_assert!((fd(&psi, &w, i, h) - g[i]).abs() <= 1e-6 * g.amax().max(1.0));
        }
        let back = psi.gradient_inverse(&g).unwrap();
        prop_assert!((&back - &w).amax() <= 1e-12 * w.amax());
    }

    #[test]
    fn pnorm_gradient_has_dual_norm_equal_to_primal_norm(q in 1.05..=2.0f64, w in vector(6)) {
        let psi = Potential::pnorm(q).unwrap();
        let w = DVector::from_vec(w);
        let g = psi.gradient(&w).unwrap();
        let p = q / (q - 1.0);
        prop_assert!((lp_norm(g.as_slice(), p) - lp_norm(w.as_slice(), q)).abs() <= 1e-10 * (1.0 + lp_norm(w.as_slice(), q)));
        prop_assert!((g.dot(&w) - lp_norm(w.as_slice(), q).powi(2)).abs() <= 1e-10 * (1.0 + w.norm_squared()));
    }
}
