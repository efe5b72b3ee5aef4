//! Stochastic dual averaging and mirror descent for composite quadratic
//! objectives `ψ = f + g` over Euclidean, entropy and `ℓp` geometries.
//!
//! Also provides the theoretical bound evaluators, exact lower-bound and
//! closed-form comparison oracles, and continuous-time flow integrators used
//! to validate the optimizers.

// Parameter checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod analysis;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod odeflow;
pub mod problems;
pub mod regularizer;

pub use algorithms::{
    average, run_da, run_da_with, run_md, run_saga, run_sda, run_sgd, Algorithm, Averager, Checkpoint, CheckpointGrid, Composite,
    OptimizerState, RunOptions, RunTrace, SagaConfig, StepSchedule,
};
pub use error::{Error, Result};
pub use geometry::Geometry;
pub use numerics::{Matrix, RngStream, SpdMatrix, Vector};
pub use problems::{
    compute_optimum, generate_synthetic, load_libsvm, AdditiveNoiseOracle, Dataset, ExactGradient, GradientOracle,
    LeastSquaresStream, OptimumCertificate, QuadraticProblem, SyntheticSpec,
};
pub use odeflow::{integrate_da_flow, integrate_md_flow, FlowSpec, FlowTrace};
pub use regularizer::{composite_map, QuadraticWeight, Regularizer};
