use nalgebra::QR;

use super::{LeastSquaresStream, QuadraticProblem, Sampler};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream, SpdMatrix, Vector};

/// Parameters of the synthetic least-squares family: Gaussian design with
/// spectrum `1/k`, random orthogonal eigenvectors and nonnegative optimum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub seed: u64,
    pub noise_sd: f64,
}

impl SyntheticSpec {
    pub fn new(d: usize, seed: u64) -> Self {
        Self { d, seed, noise_sd: 1.0 }
    }
}

/// Orthogonal matrix from the QR factorization of a seeded Gaussian matrix,
/// with column signs fixed so that `R` has a positive diagonal.
pub fn random_orthogonal(rng: &mut RngStream, d: usize) -> Matrix {
    let g = rng.normal_matrix(d, d);
    let qr = QR::new(g);
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Builds the problem and a stream sharing it. The problem depends only on
/// `spec.seed`; the stream is seeded with `stream_seed`.
pub fn generate_synthetic(spec: SyntheticSpec, stream_seed: u64) -> Result<(QuadraticProblem, LeastSquaresStream)> {
    if spec.d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let d = spec.d;
    let mut rng = RngStream::new(spec.seed);
    let u = random_orthogonal(&mut rng, d);
    let spectrum = Vector::from_fn(d, |k, _| 1.0 / (k + 1) as f64);
    let sigma = SpdMatrix::from_spectrum(&u, &spectrum)?;
    let theta = rng.normal_vector(d).map(f64::abs);
    let cov_factor = &u * Matrix::from_diagonal(&spectrum.map(f64::sqrt));
    let problem = QuadraticProblem::from_minimizer(sigma, theta.clone())?;
    let stream = LeastSquaresStream::new(
        Sampler::Synthetic { cov_factor, theta, noise_sd: spec.noise_sd },
        stream_seed,
    );
    Ok((problem, stream))
}
