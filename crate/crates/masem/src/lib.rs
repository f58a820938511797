//! Uniform sampling on implicitly constrained, possibly disconnected
//! manifolds by entropy-maximizing resampling.
//!
//! The feasible set `{x : h(x) = 0, g(x) <= 0}` inside a bounding box is only
//! accessible point-wise. Local kernels (nonlinear hit-and-run, constrained
//! Langevin) mix well within a connected component but cannot allocate mass
//! across components. The sampler here interleaves those kernels with an
//! importance-resampling step whose weights come from k-nearest-neighbor
//! radii: sparsely covered regions get more offspring, driving the empirical
//! distribution toward the maximum-entropy (uniform) density on the feasible
//! set.
//!
//! Crate layout:
//! * [`constraint`] — implicit problems, slack, residual stacking, Jacobians;
//! * [`projection`] — Gauss-Newton descent on the squared slack;
//! * [`kernels`] / [`scmc`] — local rejuvenation kernels and the annealed
//!   soft-constraint baseline;
//! * [`resampler`] — kNN radii, entropy weights, systematic resampling, and
//!   the main sampling loop;
//! * [`meanfield`] — executable checks of the resampling theory;
//! * [`benchmarks`] — problem suite with ground-truth samplers;
//! * [`metrics`] — Sinkhorn, pairwise-distance KL, feasible entropy, TV,
//!   homotopy entropy;
//! * [`baselines`] — cluster-volume resampling;
//! * [`runner`] — seeded experiment execution with JSONL/CSV output.

pub mod baselines;
pub mod benchmarks;
pub mod constraint;
pub mod ensemble;
pub mod error;
pub mod kernels;
pub mod meanfield;
pub mod metrics;
pub mod projection;
pub mod resampler;
pub mod rng;
pub mod runner;
pub mod scmc;

pub use constraint::{ConstraintProblem, GroundTruthSampler, SlackValue};
pub use ensemble::ParticleEnsemble;
pub use error::{MasemError, Result};
pub use kernels::{KernelConfig, KernelKind};
pub use projection::{gauss_newton_project, initialize_ensemble, ProjectionConfig};
pub use resampler::{
    entropy_weights, knn_density, knn_radii, masem_run, systematic_resample, KnnRadii,
    MasemConfig, WeightVector,
};
