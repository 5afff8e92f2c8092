//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with timings.
//!
//! Runs without the libtest harness so every line is printed. Pass criterion
//! numbers as arguments to run a subset, e.g. `cargo test --test acceptance -- 1 4`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use reflectron::bounds::{bound_corollary, BoundInputs, CorollaryKind};
use reflectron::geometry::{NormPair, Potential, PotentialKind};
use reflectron::harness::data::{sample_sparse_task, SparseTaskSpec};
use reflectron::harness::gram::gram_norm_diagnostic;
use reflectron::harness::output::{median, summarize};
use reflectron::harness::sweep::{
    run_lowrank_experiment, run_sparse_cell, run_sweep, Algorithm, LowRankOptions, SweepGrid,
};
use reflectron::linalg::{dot, l1_norm, l2_norm, lp_norm};
use reflectron::matrixglm::SystemSpec;
use reflectron::model::{evaluate, sigmoid, Activation, Dataset, XiMode};
use reflectron::projection::{
    hypentropy_shrinkage, project_l1_euclidean, project_l1_hypentropy, project_lp_radial,
    project_simplex_kl, project_spectral, ConstraintSet,
};
use reflectron::trainer::{
    fit_full_batch, fit_full_batch_with_holdout, fit_stochastic, max_stable_step, ReflectronConfig, Sample,
    StepBoundInputs, StepRule,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let all = [
        Criterion { id: 1, name: "GLM-tron equivalence", budget: secs(1), run: c01_glmtron_equivalence },
        Criterion { id: 2, name: "geometry suite", budget: secs(10), run: c02_geometry },
        Criterion { id: 3, name: "projection oracles", budget: secs(30), run: c03_projection_oracles },
        Criterion { id: 4, name: "hypentropy projection boundary", budget: secs(30), run: c04_hypentropy_boundary },
        Criterion { id: 5, name: "realizable descent and rate", budget: secs(10), run: c05_realizable_descent },
        Criterion { id: 6, name: "implicit bias", budget: secs(300), run: c06_implicit_bias },
        Criterion { id: 7, name: "sparse-vector ordering", budget: secs(1800), run: c07_sparse_ordering },
        Criterion { id: 8, name: "low-rank ordering", budget: secs(1800), run: c08_lowrank_ordering },
        Criterion { id: 9, name: "stochastic rates", budget: secs(600), run: c09_stochastic_rates },
        Criterion { id: 10, name: "bound formulas", budget: secs(600), run: c10_bounds },
        Criterion { id: 11, name: "Gram-norm diagnostic", budget: secs(120), run: c11_gram_norms },
    ];
    let mut failed = 0;
    for c in all.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_text(&e))));
        let took = start.elapsed();
        let in_time = took <= c.budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time { String::new() } else { format!("; over the {:?} budget", c.budget) };
        println!(
            "criterion {:>2} {:<32} {} ({:.2}s) {}{}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail,
            timing
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown payload".into())
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

fn uniform_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

// ---------------------------------------------------------------- criterion 1

/// Textbook GLM-tron: θ ← θ − (λ/n) Σ (u(⟨θ, x_i⟩) − y_i) x_i, written as plain loops.
fn glmtron_oracle(x: &[f64], y: &[f64], d: usize, lambda: f64, iterations: usize) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut theta = vec![0.0; d];
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut g = vec![0.0; d];
        for i in 0..n {
            let row = &x[i * d..(i + 1) * d];
            let r = sigmoid(dot(&theta, row)) - y[i];
            for j in 0..d {
                g[j] += r * row[j];
            }
        }
        for j in 0..d {
            theta[j] -= lambda * (g[j] / n as f64);
        }
        out.push(theta.clone());
    }
    out
}

fn c01_glmtron_equivalence() -> Outcome {
    let (d, n, iters) = (50, 200, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let theta = gaussian(&mut rng, d) * 0.3;
    let x = uniform_features(&mut rng, n, d);
    let y: Vec<f64> = (0..n)
        .map(|i| sigmoid(dot(theta.as_slice(), &x[i * d..(i + 1) * d])) + rng.random_range(-0.1..=0.1))
        .collect();
    let data = Dataset::from_rows(d, x.clone(), y.clone(), None, NormPair::L2L2).unwrap();
    let cfg = ReflectronConfig::new(Potential::euclidean(), 1.0, iters).with_record_trace(true);
    let trace = fit_full_batch(&cfg, &data).unwrap();
    let ours = trace.iterates.expect("iterates recorded");
    let oracle = glmtron_oracle(&x, &y, d, 1.0, iters);
    let mismatched = ours.iter().zip(&oracle).filter(|(a, b)| a.as_slice() != b.as_slice()).count();
    Outcome::new(
        mismatched == 0 && ours.len() == iters,
        format!("{} of {iters} iterates differ bitwise from the loop oracle", mismatched),
    )
}

// ---------------------------------------------------------------- criterion 2

struct GeometryTally {
    points: usize,
    worst_fd: f64,
    worst_roundtrip: f64,
    worst_three_point: f64,
    worst_duality: f64,
    min_divergence: f64,
    worst_strong_convexity: f64,
}

/// Five-point central difference of `psi.value` along coordinate `i` with step `h`.
fn fd_partial(psi: &Potential, w: &DVector<f64>, i: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut v = w.clone();
        v[i] += s * h;
        psi.value(&v).unwrap()
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

fn random_potential(rng: &mut ChaCha8Rng, family: usize, d: usize) -> Potential {
    match family {
        0 => Potential::euclidean(),
        1 => Potential::pnorm(rng.random_range(1.1..=2.0)).unwrap(),
        2 => Potential::hypentropy(10f64.powf(rng.random_range(-2.0..=0.5))).unwrap(),
        _ => {
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            Potential::negentropy(DVector::from_iterator(d, raw.iter().map(|v| v / s))).unwrap()
        }
    }
}

fn random_primal(rng: &mut ChaCha8Rng, psi: &Potential, d: usize, simplex: bool) -> DVector<f64> {
    match psi.kind() {
        PotentialKind::NegEntropy { .. } => {
            let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal).exp());
            if simplex {
                let s = v.sum();
                v / s
            } else {
                v
            }
        }
        _ => gaussian(rng, d),
    }
}

fn geometry_family(family: usize, points: usize) -> GeometryTally {
    let d = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(200 + family as u64);
    let mut t = GeometryTally {
        points: 0,
        worst_fd: 0.0,
        worst_roundtrip: 0.0,
        worst_three_point: 0.0,
        worst_duality: 0.0,
        min_divergence: f64::INFINITY,
        worst_strong_convexity: f64::NEG_INFINITY,
    };
    for _ in 0..points {
        let psi = random_potential(&mut rng, family, d);
        let simplex = rng.random::<bool>();
        let x = random_primal(&mut rng, &psi, d, simplex);
        let y = random_primal(&mut rng, &psi, d, simplex);
        let z = random_primal(&mut rng, &psi, d, simplex);
        let gx = psi.gradient(&x).unwrap();
        let gy = psi.gradient(&y).unwrap();
        let gz = psi.gradient(&z).unwrap();

        let offset = match psi.kind() {
            PotentialKind::Euclidean => 1.0,
            PotentialKind::Hypentropy { beta } => *beta,
            _ => 0.0,
        };
        let fd = DVector::from_fn(d, |i, _| fd_partial(&psi, &x, i, 1e-3 * (x[i].abs() + offset)));
        t.worst_fd = t.worst_fd.max(max_abs_diff(&fd, &gx) / gx.amax());

        let back = psi.gradient_inverse(&gx).unwrap();
        let zeta = gaussian(&mut rng, d);
        let forth = psi.gradient(&psi.gradient_inverse(&zeta).unwrap()).unwrap();
        t.worst_roundtrip = t
            .worst_roundtrip
            .max(max_abs_diff(&back, &x) / x.amax().max(1.0))
            .max(max_abs_diff(&forth, &zeta) / zeta.amax().max(1.0));

        let dxy = psi.divergence(&x, &y).unwrap();
        let dyz = psi.divergence(&y, &z).unwrap();
        let dxz = psi.divergence(&x, &z).unwrap();
        t.min_divergence = t.min_divergence.min(dxy).min(dyz).min(dxz);
        let lhs = dxy + dyz - dxz;
        let rhs = (&gz - &gy).dot(&(&x - &y));
        let scale = 1.0 + dxy.abs() + dyz.abs() + dxz.abs() + rhs.abs();
        t.worst_three_point = t.worst_three_point.max((lhs - rhs).abs() / scale);

        let dual = psi.dual_divergence(&gy, &gx).unwrap();
        t.worst_duality = t.worst_duality.max((dual - dxy).abs() / (1.0 + dxy));

        // Strong convexity in the declared norm: σ from the potential, or for
        // hypentropy the ℓ1 modulus 1/(B + dβ) on the ℓ1 ball of radius B.
        let diff = (&x - &y).as_slice().to_vec();
        let lower = match psi.kind() {
            PotentialKind::Euclidean => Some(0.5 * l2_norm(&diff).powi(2)),
            PotentialKind::PNorm { q } => Some(0.5 * (q - 1.0) * lp_norm(&diff, *q).powi(2)),
            PotentialKind::Hypentropy { beta } => {
                let b = l1_norm(x.as_slice()).max(l1_norm(y.as_slice()));
                Some(0.5 * l1_norm(&diff).powi(2) / (b + d as f64 * beta))
            }
            PotentialKind::NegEntropy { .. } if simplex => Some(0.5 * l1_norm(&diff).powi(2)),
            PotentialKind::NegEntropy { .. } => None,
        };
        if let Some(lb) = lower {
            t.worst_strong_convexity = t.worst_strong_convexity.max((lb - dxy) / (1.0 + dxy));
        }
        t.points += 1;
    }
    t
}

fn c02_geometry() -> Outcome {
    let names = ["euclidean", "pnorm", "hypentropy", "negentropy"];
    let mut pass = true;
    let mut parts = Vec::new();
    for (family, name) in names.iter().enumerate() {
        let t = geometry_family(family, 1000);
        let ok = t.points >= 1000
            && t.worst_fd <= 1e-6
            && t.worst_roundtrip <= 1e-8
            && t.min_divergence >= 0.0
            && t.worst_strong_convexity <= 1e-8
            && t.worst_three_point <= 1e-8
            && t.worst_duality <= 1e-8;
        pass &= ok;
        parts.push(format!(
            "{name}: fd {:.1e} roundtrip {:.1e} three-point {:.1e} duality {:.1e} min D {:.1e} sc slack {:.1e}",
            t.worst_fd, t.worst_roundtrip, t.worst_three_point, t.worst_duality, t.min_divergence, t.worst_strong_convexity
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 3

struct OracleTally {
    cases: usize,
    worst_gap: f64,
    worst_infeasibility: f64,
    worst_idempotence: f64,
    worst_pythagoras: f64,
}

impl OracleTally {
    fn new() -> Self {
        OracleTally { cases: 0, worst_gap: 0.0, worst_infeasibility: 0.0, worst_idempotence: 0.0, worst_pythagoras: 0.0 }
    }

    fn ok(&self) -> bool {
        self.cases > 0
            && self.worst_gap <= 1e-4
            && self.worst_infeasibility <= 1e-9
            && self.worst_idempotence <= 1e-10
            && self.worst_pythagoras <= 1e-8
    }

    fn describe(&self, name: &str) -> String {
        format!(
            "{name}: {} cases, gap {:.1e}, infeasible {:.1e}, idempotence {:.1e}, pythagoras {:.1e}",
            self.cases, self.worst_gap, self.worst_infeasibility, self.worst_idempotence, self.worst_pythagoras
        )
    }
}

/// Checks one projection against a cloud of feasible candidates.
///
/// `div(a, b)` is the Bregman divergence D(a, b); `excess(v)` measures how far
/// `v` lies outside the set.
fn check_projection<V: Clone>(
    tally: &mut OracleTally,
    y: &V,
    out: &V,
    again: &V,
    candidates: &[V],
    div: impl Fn(&V, &V) -> f64,
    excess: impl Fn(&V) -> f64,
    dist: impl Fn(&V, &V) -> f64,
) {
    let d_out = div(out, y);
    for z in candidates {
        let d_z = div(z, y);
        tally.worst_gap = tally.worst_gap.max(d_out - d_z);
        let pyth = div(z, out) + d_out - d_z;
        tally.worst_pythagoras = tally.worst_pythagoras.max(pyth / (1.0 + d_z));
    }
    tally.worst_infeasibility = tally.worst_infeasibility.max(excess(out));
    tally.worst_idempotence = tally.worst_idempotence.max(dist(again, out));
    tally.cases += 1;
}

/// Random points of the ℓq ball of radius `r`, half of them on the sphere.
fn ball_points(rng: &mut ChaCha8Rng, d: usize, q: f64, r: f64, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            let v = gaussian(rng, d);
            let scale = if k % 2 == 0 { 1.0 } else { rng.random_range(0.0..1.0f64).powf(1.0 / d as f64) };
            &v * (r * scale / lp_norm(v.as_slice(), q))
        })
        .collect()
}

/// Feasible points near `center`: small perturbations pulled back into the ℓq ball.
fn local_points(rng: &mut ChaCha8Rng, center: &DVector<f64>, q: f64, r: f64, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            let eps = 10f64.powi(-(1 + (k % 4) as i32));
            let v = center + gaussian(rng, center.len()) * eps;
            let n = lp_norm(v.as_slice(), q);
            if n > r {
                v * (r / n)
            } else {
                v
            }
        })
        .collect()
}

fn c03_projection_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = 200;
    let cloud = 1500;
    let vdist = |a: &DVector<f64>, b: &DVector<f64>| max_abs_diff(a, b);

    // Euclidean projection onto the ℓ1 ball.
    let mut duchi = OracleTally::new();
    for k in 0..cases {
        let d = 1 + k % 4;
        let r = rng.random_range(0.2..2.0);
        let y = gaussian(&mut rng, d) * 2.0;
        let out = project_l1_euclidean(&y, r).unwrap();
        let again = project_l1_euclidean(&out, r).unwrap();
        let mut cands = ball_points(&mut rng, d, 1.0, r, cloud);
        cands.extend(local_points(&mut rng, &out, 1.0, r, 500));
        check_projection(
            &mut duchi,
            &y,
            &out,
            &again,
            &cands,
            |a, b| 0.5 * (a - b).norm_squared(),
            |v| (l1_norm(v.as_slice()) - r).max(0.0),
            vdist,
        );
    }

    // Radial rescaling under the matching ℓq potential (and ℓ2 under the Euclidean one).
    let mut radial = OracleTally::new();
    for k in 0..cases {
        let d = 1 + k % 4;
        let q = if k % 4 == 0 { 2.0 } else { rng.random_range(1.2..=2.0) };
        let psi = if q == 2.0 { Potential::euclidean() } else { Potential::pnorm(q).unwrap() };
        let r = rng.random_range(0.2..2.0);
        let y = gaussian(&mut rng, d) * 2.0;
        let out = project_lp_radial(q, &y, r).unwrap();
        let again = project_lp_radial(q, &out, r).unwrap();
        let mut cands = ball_points(&mut rng, d, q, r, cloud);
        cands.extend(local_points(&mut rng, &out, q, r, 500));
        check_projection(
            &mut radial,
            &y,
            &out,
            &again,
            &cands,
            |a, b| psi.divergence(a, b).unwrap(),
            |v| (lp_norm(v.as_slice(), q) - r).max(0.0),
            vdist,
        );
    }

    // Hypentropy Bregman projection onto the ℓ1 ball.
    let mut hyp = OracleTally::new();
    for k in 0..cases {
        let d = 1 + k % 4;
        let beta = 10f64.powf(rng.random_range(-2.0..=0.0));
        let psi = Potential::hypentropy(beta).unwrap();
        let r = rng.random_range(0.2..2.0);
        let y = gaussian(&mut rng, d) * 2.0;
        let out = project_l1_hypentropy(beta, &y, r).unwrap();
        let again = project_l1_hypentropy(beta, &out, r).unwrap();
        let mut cands = ball_points(&mut rng, d, 1.0, r, cloud);
        cands.extend(local_points(&mut rng, &out, 1.0, r, 500));
        check_projection(
            &mut hyp,
            &y,
            &out,
            &again,
            &cands,
            |a, b| psi.divergence(a, b).unwrap(),
            |v| (l1_norm(v.as_slice()) - r).max(0.0),
            vdist,
        );
    }

    // KL projection onto the simplex.
    let mut kl = OracleTally::new();
    for k in 0..cases {
        let d = 1 + k % 4;
        let psi = Potential::negentropy_uniform(d).unwrap();
        let y = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal).exp());
        let out = project_simplex_kl(&y).unwrap();
        let again = project_simplex_kl(&out).unwrap();
        let mut cands: Vec<DVector<f64>> = (0..cloud)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| -rng.random_range(1e-12..1.0f64).ln());
                let s = v.sum();
                v / s
            })
            .collect();
        cands.extend((0..500).map(|k| {
            let eps = 10f64.powi(-(1 + (k % 4) as i32));
            let v = out.map(|o| o * (eps * rng.sample::<f64, _>(StandardNormal)).exp());
            let s = v.sum();
            v / s
        }));
        check_projection(
            &mut kl,
            &y,
            &out,
            &again,
            &cands,
            |a, b| psi.divergence(a, b).unwrap(),
            |v| (v.sum() - 1.0).abs().max(-v.min()),
            vdist,
        );
    }

    // Spectral projection: Frobenius-nearest matrix with nuclear norm at most R.
    let mut spectral = OracleTally::new();
    for k in 0..cases {
        let m = 1 + k % 4;
        let r = rng.random_range(0.2..2.0);
        let set = ConstraintSet::SpectralL1 { radius: r };
        let y = DMatrix::from_fn(m, m, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let out = project_spectral(&set, &y, &Potential::euclidean()).unwrap();
        let again = project_spectral(&set, &out, &Potential::euclidean()).unwrap();
        let nuclear = |a: &DMatrix<f64>| a.singular_values().sum();
        let into_ball = |a: DMatrix<f64>| {
            let n = nuclear(&a);
            if n > r {
                a * (r / n)
            } else {
                a
            }
        };
        let mut cands: Vec<DMatrix<f64>> = (0..cloud)
            .map(|j| {
                let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
                let n = nuclear(&a);
                let s = if j % 2 == 0 { 1.0 } else { rng.random_range(0.0..1.0) };
                a * (r * s / n)
            })
            .collect();
        cands.extend((0..500).map(|j| {
            let eps = 10f64.powi(-(1 + (j % 4) as i32));
            into_ball(&out + DMatrix::from_fn(m, m, |_, _| eps * rng.sample::<f64, _>(StandardNormal)))
        }));
        check_projection(
            &mut spectral,
            &y,
            &out,
            &again,
            &cands,
            |a, b| 0.5 * (a - b).norm_squared(),
            |v| (nuclear(v) - r).max(0.0),
            |a, b| (a - b).amax(),
        );
    }

    let all = [
        (&duchi, "l1 euclidean"),
        (&radial, "lp radial"),
        (&hyp, "l1 hypentropy"),
        (&kl, "simplex kl"),
        (&spectral, "spectral l1"),
    ];
    let pass = all.iter().all(|(t, _)| t.ok());
    Outcome::new(pass, all.iter().map(|(t, n)| t.describe(n)).collect::<Vec<_>>().join("; "))
}

// ---------------------------------------------------------------- criterion 4

fn c04_hypentropy_boundary() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mass: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    let mut infeasible_inputs = 0;
    while infeasible_inputs < 100 {
        let d = rng.random_range(1..=50);
        let beta = 10f64.powf(rng.random_range(-4.0..=1.0));
        let y = gaussian(&mut rng, d) * 10f64.powf(rng.random_range(-1.0..=1.0));
        let r = rng.random_range(0.01..1.0) * l1_norm(y.as_slice());
        if l1_norm(y.as_slice()) <= r {
            continue;
        }
        infeasible_inputs += 1;
        let out = project_l1_hypentropy(beta, &y, r).unwrap();
        worst_mass = worst_mass.max((l1_norm(out.as_slice()) - r).abs());
        let same = hypentropy_shrinkage(1.0, beta, &y).unwrap();
        worst_identity = worst_identity.max(max_abs_diff(&same, &y));
    }
    Outcome::new(
        worst_mass <= 1e-6 && worst_identity <= 1e-12,
        format!("max | ||out||_1 - R | = {worst_mass:.2e}; max shrinkage(1) deviation = {worst_identity:.2e}"),
    )
}

// ---------------------------------------------------------------- criterion 5

fn c05_realizable_descent() -> Outcome {
    let (d, n, iterations) = (50, 20, 2000);
    let mut worst_increase: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut runs = 0;
    for psi in [Potential::euclidean(), Potential::pnorm(1.5).unwrap()] {
        for seed in 0..10 {
            let task = sample_sparse_task(&SparseTaskSpec {
                d,
                sparsity: 5,
                n_train: n,
                n_holdout: 1,
                n_test: 1,
                noise: 0.0,
                seed: 500 + seed,
            })
            .unwrap();
            let pair = psi.norm_pair();
            let features = task.train.features().to_vec();
            let labels = task.train.labels().to_vec();
            let data = Dataset::from_rows(d, features, labels.clone(), Some(labels), pair).unwrap();
            let act = Activation::sigmoid();
            let sigma = psi.strong_convexity().unwrap();
            let c = data.feature_bound();
            let (b, l) = (1.0, act.lipschitz);
            let lambda = 0.5 * max_stable_step(
                &StepBoundInputs { sigma: Some(sigma), c, b, l, horizon: None },
                StepRule::Lemma2Realizable,
            )
            .unwrap();
            let alpha = 1.0 - lambda * c * c * b * l / (2.0 * sigma);
            let cfg = ReflectronConfig::new(psi.clone(), lambda, iterations).with_reference(task.theta.clone());
            let tr = fit_full_batch(&cfg, &data).unwrap();

            let d1 = psi.divergence(&task.theta, &tr.initial_params).unwrap();
            let divs = tr.divergence_to_reference.as_ref().unwrap();
            let mut prev = d1;
            for &dv in divs {
                worst_increase = worst_increase.max((dv - prev) / d1);
                prev = dv;
            }

            let mut best = evaluate(&tr.initial_params, &data, &act, XiMode::One, false).unwrap().excess.unwrap();
            let excess = tr.excess_risk.as_ref().unwrap();
            for t in 1..=iterations {
                if t >= 2 {
                    best = best.min(excess[t - 2]);
                }
                let bound = l * d1 / (alpha * lambda * t as f64);
                worst_ratio = worst_ratio.max(best / bound);
            }
            runs += 1;
        }
    }
    Outcome::new(
        worst_increase <= 1e-12 && worst_ratio <= 1.0,
        format!(
            "{runs} runs; largest relative divergence increase {worst_increase:.1e}; largest min-risk / bound ratio {worst_ratio:.3}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn c06_implicit_bias() -> Outcome {
    let (d, n) = (100, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let theta = gaussian(&mut rng, d);
    let x = uniform_features(&mut rng, n, d);
    let y: Vec<f64> = (0..n).map(|i| dot(theta.as_slice(), &x[i * d..(i + 1) * d])).collect();
    let data = Dataset::from_rows(d, x.clone(), y.clone(), None, NormPair::L2L2).unwrap();
    let act = Activation::identity();
    let c = data.feature_bound();
    let lambda = 0.5
        * max_stable_step(&StepBoundInputs { sigma: Some(1.0), c, b: 1.0, l: 1.0, horizon: None }, StepRule::Lemma2Realizable)
            .unwrap();
    let cfg = ReflectronConfig::new(Potential::euclidean(), lambda, 40_000).with_activation(act);
    let tr = fit_full_batch(&cfg, &data).unwrap();
    let xm = DMatrix::from_row_slice(n, d, &x);
    let pinv = xm.pseudo_inverse(1e-12).unwrap();
    let min_norm = pinv * DVector::from_vec(y);
    let rel = (&tr.final_params - &min_norm).norm() / min_norm.norm();
    let interpolation_ok = rel <= 1e-4;

    let task = SparseTaskSpec { d: 1000, sparsity: 10, n_train: 1000, n_holdout: 500, n_test: 1000, noise: 0.1, seed: 60 };
    let grid = SweepGrid {
        lambdas: vec![1.0],
        betas: vec![1e-3],
        ps: Vec::new(),
        algorithms: vec![Algorithm::Glmtron, Algorithm::Hypentropy],
        trials: 3,
        iterations: 1000,
        project: false,
        xi: XiMode::One,
    };
    let mut glm = Vec::new();
    let mut hyp = Vec::new();
    for trial in 0..grid.trials {
        for cell in 0..2 {
            let r = run_sparse_cell(&task, &grid, trial, cell).unwrap();
            match r.algorithm {
                Algorithm::Glmtron => glm.push(r.support_count as f64),
                _ => hyp.push(r.support_count as f64),
            }
        }
    }
    let (g, h) = (median(&glm), median(&hyp));
    let sparsity_ok = h <= 0.1 * g;
    Outcome::new(
        interpolation_ok && sparsity_ok,
        format!(
            "min-norm relative error {rel:.2e}; median support above 1e-3: glmtron {g}, hypentropy(1e-3) {h} (ratio {:.3}, need <= 0.1)",
            h / g
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn c07_sparse_ordering() -> Outcome {
    let grid = SweepGrid {
        lambdas: vec![1.0, 0.5, 0.1],
        betas: vec![1e-1, 1e-2, 1e-3],
        ps: vec![1.1, 1.3, 1.5],
        algorithms: Algorithm::ALL.to_vec(),
        trials: 5,
        iterations: 1000,
        project: true,
        xi: XiMode::One,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [500, 1000, 2000] {
        let task = SparseTaskSpec { d: 2000, sparsity: 20, n_train: n, n_holdout: 500, n_test: 1000, noise: 0.1, seed: 70 };
        let summary = summarize(&run_sweep(&task, &grid).unwrap());
        let med = |a| summary.best_for(a, n).map(|c| c.test_risk_median).unwrap_or(f64::NAN);
        let (g, p, h) = (med(Algorithm::Glmtron), med(Algorithm::Pnorm), med(Algorithm::Hypentropy));
        pass &= p <= g && h <= g;
        parts.push(format!("n={n}: glmtron {g:.3e}, pnorm {p:.3e}, hypentropy {h:.3e}"));
    }
    Outcome::new(pass, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 8

fn c08_lowrank_ordering() -> Outcome {
    let spec = SystemSpec::random(200, 4, 0.9, 0.1, 5, 80).unwrap();
    let grid = SweepGrid {
        lambdas: vec![0.1, 0.05, 0.01],
        betas: vec![1.0, 1e-1, 1e-2],
        ps: Vec::new(),
        algorithms: vec![Algorithm::Glmtron, Algorithm::Hypentropy],
        trials: 5,
        iterations: 400,
        project: true,
        xi: XiMode::One,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [100, 200] {
        let opts = LowRankOptions { n_train: n, n_holdout: 100, n_test: 200, seed: 81 };
        let summary = summarize(&run_lowrank_experiment(&spec, &opts, &grid).unwrap());
        let med = |a| summary.best_for(a, n).map(|c| c.test_risk_median).unwrap_or(f64::NAN);
        let (g, h) = (med(Algorithm::Glmtron), med(Algorithm::Hypentropy));
        pass &= h <= g;
        parts.push(format!("n={n}: glmtron {g:.5e}, hypentropy {h:.5e}"));
    }
    Outcome::new(pass, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 9

struct Stream {
    theta: DVector<f64>,
    noise: f64,
    rng: ChaCha8Rng,
}

impl Iterator for Stream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        let d = self.theta.len();
        let x = DVector::from_fn(d, |_, _| self.rng.random_range(-1.0..=1.0));
        let clean = sigmoid(self.theta.dot(&x));
        let w = if self.noise > 0.0 { self.rng.random_range(-self.noise..=self.noise) } else { 0.0 };
        Some(Sample { x, y: clean + w })
    }
}

fn clean_eval_set(theta: &DVector<f64>, m: usize, seed: u64) -> Dataset {
    let d = theta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_features(&mut rng, m, d);
    let y: Vec<f64> = (0..m).map(|i| sigmoid(dot(theta.as_slice(), &x[i * d..(i + 1) * d]))).collect();
    Dataset::from_rows(d, x, y.clone(), Some(y), NormPair::L2L2).unwrap()
}

/// Least-squares slope of `log10 v` against `log10 t`; an exact zero counts as the smallest positive double.
fn loglog_slope(ts: &[f64], vs: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.log10()).collect();
    let ys: Vec<f64> = vs.iter().map(|v| v.max(f64::MIN_POSITIVE).log10()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn c09_stochastic_rates() -> Outcome {
    let d = 50;
    let horizons = [100usize, 1000, 10_000];
    let seeds = 10;
    let act = Activation::sigmoid();
    // Features lie in [-1, 1]^d, so C = √d bounds their ℓ2 norm.
    let c = (d as f64).sqrt();
    let base = |horizon| StepBoundInputs { sigma: Some(1.0), c, b: 1.0, l: act.lipschitz, horizon };

    let mut realizable: Vec<Vec<f64>> = vec![Vec::new(); horizons.len()];
    let mut noisy: Vec<Vec<f64>> = vec![Vec::new(); horizons.len()];
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let theta = gaussian(&mut rng, d) * (2.0 / (d as f64).sqrt());
        let eval = clean_eval_set(&theta, 1000, 950 + seed);

        let lambda = 0.99 * max_stable_step(&base(None), StepRule::Lemma2Realizable).unwrap();
        let t_max = *horizons.last().unwrap();
        let cfg = ReflectronConfig::new(Potential::euclidean(), lambda, t_max);
        let stream = Stream { theta: theta.clone(), noise: 0.0, rng: ChaCha8Rng::seed_from_u64(1000 + seed) };
        let tr = fit_stochastic(&cfg, stream, Some(&eval)).unwrap();
        let ex = tr.excess_risk.unwrap();
        for (k, &t) in horizons.iter().enumerate() {
            realizable[k].push(ex[..t].iter().copied().fold(f64::INFINITY, f64::min));
        }

        for (k, &t) in horizons.iter().enumerate() {
            let lambda = 0.99 * max_stable_step(&base(Some(t)), StepRule::StochasticNoise).unwrap();
            let cfg = ReflectronConfig::new(Potential::euclidean(), lambda, t);
            let stream = Stream { theta: theta.clone(), noise: 0.1, rng: ChaCha8Rng::seed_from_u64(2000 + seed) };
            let tr = fit_stochastic(&cfg, stream, Some(&eval)).unwrap();
            noisy[k].push(tr.excess_risk.unwrap().iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    let ts: Vec<f64> = horizons.iter().map(|&t| t as f64).collect();
    let med_r: Vec<f64> = realizable.iter().map(|v| median(v)).collect();
    let med_n: Vec<f64> = noisy.iter().map(|v| median(v)).collect();
    let (sr, sn) = (loglog_slope(&ts, &med_r), loglog_slope(&ts, &med_n));
    Outcome::new(
        sr <= -0.8 && sn <= -0.4,
        format!(
            "realizable slope {sr:.3} (medians {:.2e} {:.2e} {:.2e}); noisy slope {sn:.3} (medians {:.2e} {:.2e} {:.2e})",
            med_r[0], med_r[1], med_r[2], med_n[0], med_n[1], med_n[2]
        ),
    )
}

// ---------------------------------------------------------------- criterion 10

fn c10_bounds() -> Outcome {
    let inputs = |n: f64, d: f64| {
        let mut b = BoundInputs::new(n, 0.05);
        b.l = Some(0.25);
        b.c = Some(1.0);
        b.w = Some(1.0);
        b.b = Some(1.0);
        b.q = Some(1.5);
        b.d = Some(d);
        b
    };
    let kinds = [CorollaryKind::Pq, CorollaryKind::Global, CorollaryKind::Simplex];
    let ns = [1e2, 1e3, 1e4, 1e5, 1e6];
    let decreasing = kinds.iter().all(|&k| {
        let v: Vec<f64> = ns.iter().map(|&n| bound_corollary(k, &inputs(n, 1e3)).unwrap()).collect();
        v.windows(2).all(|w| w[1] < w[0])
    });
    let ratio = |k| bound_corollary(k, &inputs(1e4, 1e6)).unwrap() / bound_corollary(k, &inputs(1e4, 1e3)).unwrap();
    let (rg, rs) = (ratio(CorollaryKind::Global), ratio(CorollaryKind::Simplex));

    // Compliant task: ℓ1.5 potential, features in [-1, 1]^d so ‖x‖_3 ≤ d^(1/3),
    // θ feasible for the ℓ1.5 ball of radius W, step size from the generalization rule.
    let (d, q) = (100usize, 1.5);
    let c = (d as f64).powf(1.0 / 3.0);
    let mut satisfied = 0;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let task = sample_sparse_task(&SparseTaskSpec {
            d,
            sparsity: 5,
            n_train: 500,
            n_holdout: 200,
            n_test: 5000,
            noise: 0.1,
            seed: 1100 + seed,
        })
        .unwrap();
        let w = 2.0 * lp_norm(task.theta.as_slice(), q);
        let psi = Potential::pnorm(q).unwrap();
        let lambda = max_stable_step(
            &StepBoundInputs { sigma: psi.strong_convexity(), c, b: 1.0, l: 0.25, horizon: None },
            StepRule::Theorem4,
        )
        .unwrap();
        let cfg = ReflectronConfig::new(psi, lambda, 1000).with_constraint(ConstraintSet::LpBall { p: q, radius: w });
        let tr = fit_full_batch_with_holdout(&cfg, &task.train, &task.holdout).unwrap();
        let measured =
            evaluate(&tr.best_params, &task.test, &Activation::sigmoid(), XiMode::One, false).unwrap().excess.unwrap();
        let mut b = BoundInputs::new(500.0, 0.05);
        b.l = Some(0.25);
        b.c = Some(c);
        b.w = Some(w);
        b.b = Some(1.0);
        b.q = Some(q);
        let bound = bound_corollary(CorollaryKind::Pq, &b).unwrap();
        if measured <= bound {
            satisfied += 1;
        }
        worst = worst.max(measured / bound);
    }
    Outcome::new(
        decreasing && rg < 3.0 && rs < 3.0 && satisfied >= 18,
        format!(
            "decreasing in n: {decreasing}; d-growth ratios global {rg:.3}, simplex {rs:.3}; bound held in {satisfied}/20 runs (max measured/bound {worst:.2e})"
        ),
    )
}

// ---------------------------------------------------------------- criterion 11

fn c11_gram_norms() -> Outcome {
    let ds = [50usize, 100, 200, 400];
    let norms: Vec<_> = ds.iter().map(|&d| gram_norm_diagnostic(d, d, 20, 11).unwrap()).collect();
    let ops: Vec<f64> = norms.iter().map(|g| g.operator).collect();
    let op_spread = ops.iter().copied().fold(f64::NEG_INFINITY, f64::max) / ops.iter().copied().fold(f64::INFINITY, f64::min);
    let fro_growth = norms[3].frobenius / norms[0].frobenius;
    Outcome::new(
        op_spread < 2.0 && fro_growth > 2.0,
        format!(
            "operator {:?} (spread {op_spread:.3}); frobenius {:?} (growth {fro_growth:.3})",
            ops.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            norms.iter().map(|g| format!("{:.2}", g.frobenius)).collect::<Vec<_>>()
        ),
    )
}
