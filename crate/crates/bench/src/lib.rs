//! Fixtures shared by the criterion benchmarks.

use dualavg::{generate_synthetic, LeastSquaresStream, QuadraticProblem, RngStream, SyntheticSpec, Vector};

/// Synthetic problem and sample stream of dimension `d`.
pub fn synthetic(d: usize) -> (QuadraticProblem, LeastSquaresStream) {
    generate_synthetic(SyntheticSpec::new(d, 1), 2).expect("valid synthetic spec")
}

/// Gaussian dual point of dimension `d`.
pub fn dual_point(d: usize, seed: u64) -> Vector {
    RngStream::new(seed).normal_vector(d)
}
