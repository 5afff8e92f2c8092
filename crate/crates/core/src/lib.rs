//! Mirror-descent pseudogradient methods for generalized linear models.
//!
//! A *Reflectron* learns `y ≈ u(⟨θ, x⟩)` for a known nondecreasing activation
//! `u` by iterating in the dual coordinates of a strongly convex potential ψ:
//!
//! ```text
//! ∇ψ(φ_{t+1}) = ∇ψ(θ̂_t) − λ · (1/n) Σ (u(⟨θ̂_t, x_i⟩) − y_i) ξ(θ̂_t, x_i) x_i
//! θ̂_{t+1}     = Bregman projection of φ_{t+1} onto the constraint set
//! ```
//!
//! With the Euclidean potential and `ξ ≡ 1` this is the GLM-tron; with
//! `ξ = u′` it is projected mirror descent on the square loss. Other
//! potentials (ℓq norms, hyperbolic entropy, negative entropy) bias the
//! iterates toward sparse or otherwise structured solutions.
//!
//! ```
//! use reflectron::prelude::*;
//!
//! let task = SparseTaskSpec { d: 40, sparsity: 3, n_train: 60, seed: 7, ..SparseTaskSpec::default() };
//! let (train, holdout, _test) = gen_sparse_task(&task).unwrap();
//!
//! let cfg = ReflectronConfig::new(Potential::hypentropy(0.01).unwrap(), 0.5, 200)
//!     .with_xi(XiMode::One);
//! let trace = fit_full_batch_with_holdout(&cfg, &train, &holdout).unwrap();
//! assert!(trace.train_risk.last().unwrap() < &trace.train_risk[0]);
//! ```
//!
//! Modules, roughly bottom-up:
//!
//! - [`geometry`]: potentials, mirror maps, Bregman divergences.
//! - [`projection`]: constraint sets and Bregman projections onto them.
//! - [`model`]: activations, datasets, risks and the pseudogradient.
//! - [`trainer`]: full-batch and stochastic loops, step-size rules, holdout selection.
//! - [`matrixglm`]: the vector-valued system-identification problem and its spectral loop.
//! - [`bounds`]: closed-form generalization bounds.
//! - [`harness`]: synthetic tasks, sweeps, serialization.

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod matrixglm;
pub mod model;
pub mod projection;
pub mod trainer;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bounds::{BoundInputs, CorollaryKind, EtaRegime};
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{BregmanPair, NormPair, Potential, PotentialKind};
    pub use crate::harness::data::{gen_sparse_task, SparseTaskSpec};
    pub use crate::matrixglm::{fit_spectral, simulate, SystemSpec, TrajectorySet};
    pub use crate::model::{Activation, Dataset, Hypothesis, XiMode};
    pub use crate::projection::{bregman_project, ConstraintSet};
    pub use crate::trainer::{
        fit_full_batch, fit_full_batch_with_holdout, fit_stochastic, max_stable_step, select_best_by_holdout,
        ReflectronConfig, StepBoundInputs, StepRule, TrainTrace,
    };
}
