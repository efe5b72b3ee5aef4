//! Quadratic objectives and their gradient oracles.

mod libsvm;
mod optimum;
mod synthetic;

pub use libsvm::{load_libsvm, parse_libsvm, Dataset};
pub use optimum::{compute_optimum, OptimumCertificate, DEFAULT_OPTIMUM_TOL};
pub use synthetic::{generate_synthetic, random_orthogonal, SyntheticSpec};

use crate::error::{Error, Result};
use crate::numerics::{check_dim, mahalanobis_sq, spd_solve, Matrix, RngStream, SpdMatrix, Vector};
use crate::regularizer::{g_eval, Regularizer};

/// `f(θ) = ½⟨θ, Σθ⟩ - ⟨q, θ⟩` with invertible `Σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProblem {
    sigma: SpdMatrix,
    q: Vector,
    theta_sigma: Vector,
    f_min: f64,
}

impl QuadraticProblem {
    pub fn new(sigma: SpdMatrix, q: Vector) -> Result<Self> {
        check_dim(sigma.dim(), q.len())?;
        let theta_sigma = spd_solve(&sigma, &q)?;
        let f_min = -0.5 * q.dot(&theta_sigma);
        Ok(Self { sigma, q, theta_sigma, f_min })
    }

    /// Builds the problem whose unconstrained minimizer is `theta_sigma`.
    pub fn from_minimizer(sigma: SpdMatrix, theta_sigma: Vector) -> Result<Self> {
        let q = sigma.mul_vec(&theta_sigma)?;
        let f_min = -0.5 * q.dot(&theta_sigma);
        Ok(Self { sigma, q, theta_sigma, f_min })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn theta_sigma(&self) -> &Vector {
        &self.theta_sigma
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f(&self, theta: &Vector) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(0.5 * theta.dot(&(self.sigma.matrix() * theta)) - self.q.dot(theta))
    }

    /// `Σθ - q`.
    pub fn full_gradient(&self, theta: &Vector) -> Result<Vector> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.sigma.matrix() * theta - &self.q)
    }

    /// `f(θ) - f(ref)` evaluated as `½‖θ - ref‖²_Σ + ⟨∇f(ref), θ - ref⟩`,
    /// which avoids cancellation between two large function values.
    pub fn f_gap(&self, theta: &Vector, reference: &Vector) -> Result<f64> {
        let diff = theta - reference;
        let grad = self.full_gradient(reference)?;
        Ok(0.5 * mahalanobis_sq(&self.sigma, &diff)? + grad.dot(&diff))
    }

    /// `ψ(θ) = f(θ) + g(θ)`.
    pub fn psi(&self, g: &Regularizer, theta: &Vector) -> Result<f64> {
        Ok(self.f(theta)? + g_eval(g, theta))
    }

    /// `ψ(θ) - ψ(ref)` without cancellation in the smooth part.
    pub fn psi_gap(&self, g: &Regularizer, theta: &Vector, reference: &Vector) -> Result<f64> {
        let gt = g_eval(g, theta);
        if !gt.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(self.f_gap(theta, reference)? + gt - g_eval(g, reference))
    }

    pub fn mahalanobis_sq(&self, v: &Vector) -> Result<f64> {
        mahalanobis_sq(&self.sigma, v)
    }
}

/// Source of (possibly noisy) gradients of the smooth part.
pub trait GradientOracle {
    fn dim(&self) -> usize;

    /// Next gradient estimate at `θ`. Stochastic oracles advance their stream.
    fn gradient(&mut self, theta: &Vector) -> Result<Vector>;

    /// Seed of the oracle's random stream, if it has one.
    fn seed(&self) -> Option<u64> {
        None
    }
}

/// Exact gradients `Σθ - q`.
#[derive(Clone, Copy, Debug)]
pub struct ExactGradient<'a>(pub &'a QuadraticProblem);

impl GradientOracle for ExactGradient<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn gradient(&mut self, theta: &Vector) -> Result<Vector> {
        self.0.full_gradient(theta)
    }
}

/// Constant zero smooth part (`f = 0`).
#[derive(Clone, Copy, Debug)]
pub struct ZeroGradient(pub usize);

impl GradientOracle for ZeroGradient {
    fn dim(&self) -> usize {
        self.0
    }

    fn gradient(&mut self, theta: &Vector) -> Result<Vector> {
        check_dim(self.0, theta.len())?;
        Ok(Vector::zeros(self.0))
    }
}

/// Pure-noise oracle `∇f_n(θ) = a + ξ_n` for a linear `f(θ) = ⟨a, θ⟩`,
/// with `ξ_n = F z_n`.
#[derive(Clone, Debug)]
pub struct LinearNoiseOracle {
    pub slope: Vector,
    pub noise_factor: Matrix,
    pub rng: RngStream,
}

impl GradientOracle for LinearNoiseOracle {
    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn gradient(&mut self, theta: &Vector) -> Result<Vector> {
        check_dim(self.slope.len(), theta.len())?;
        let z = self.rng.normal_vector(self.noise_factor.ncols());
        Ok(&self.slope + &self.noise_factor * z)
    }

    fn seed(&self) -> Option<u64> {
        Some(self.rng.seed())
    }
}

/// `∇f_n(θ) = Σθ - q - ξ_n` with `ξ_n = F z_n`, `z_n ~ N(0, I)`; `C = F Fᵀ`.
#[derive(Clone, Debug)]
pub struct AdditiveNoiseOracle {
    base: QuadraticProblem,
    noise_factor: Matrix,
    rng: RngStream,
}

impl AdditiveNoiseOracle {
    pub fn new(base: QuadraticProblem, noise_factor: Matrix, seed: u64) -> Result<Self> {
        check_dim(base.dim(), noise_factor.nrows())?;
        Ok(Self { base, noise_factor, rng: RngStream::new(seed) })
    }

    /// Isotropic noise `C = s² I`.
    pub fn isotropic(base: QuadraticProblem, scale: f64, seed: u64) -> Self {
        let d = base.dim();
        Self::new(base, Matrix::identity(d, d) * scale, seed).expect("square factor")
    }

    pub fn problem(&self) -> &QuadraticProblem {
        &self.base
    }

    /// `C = F Fᵀ`.
    pub fn noise_covariance(&self) -> Matrix {
        &self.noise_factor * self.noise_factor.transpose()
    }

    /// `tr Σ^{-1} C`.
    pub fn trace_sigma_inv_c(&self) -> Result<f64> {
        let c = self.noise_covariance();
        let mut tr = 0.0;
        for j in 0..c.ncols() {
            let col: Vector = c.column(j).into_owned();
            tr += spd_solve(self.base.sigma(), &col)?[j];
        }
        Ok(tr)
    }
}

impl GradientOracle for AdditiveNoiseOracle {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn gradient(&mut self, theta: &Vector) -> Result<Vector> {
        let grad = self.base.full_gradient(theta)?;
        let z = self.rng.normal_vector(self.noise_factor.ncols());
        if self.noise_factor.iter().all(|&x| x == 0.0) {
            // F = 0: return the exact gradient bits (avoids -0.0 - 0.0 sign flips).
            return Ok(grad);
        }
        Ok(grad - &self.noise_factor * z)
    }

    fn seed(&self) -> Option<u64> {
        Some(self.rng.seed())
    }
}

/// Where least-squares samples `(x, y)` come from.
#[derive(Clone, Debug)]
pub enum Sampler {
    /// `x = F z`, `y = ⟨x, θ_Σ⟩ + σ ε`, with `F Fᵀ = Σ`.
    Synthetic { cov_factor: Matrix, theta: Vector, noise_sd: f64 },
    /// Rows of a finite dataset drawn uniformly with replacement.
    Finite { rows: Vec<Vector>, labels: Vec<f64> },
    /// Rows of a finite dataset visited once in order; errors when exhausted.
    FiniteOnce { rows: Vec<Vector>, labels: Vec<f64>, cursor: usize },
}

/// Stream of least-squares gradients `(⟨x, θ⟩ - y) x`.
#[derive(Clone, Debug)]
pub struct LeastSquaresStream {
    sampler: Sampler,
    rng: RngStream,
}

impl LeastSquaresStream {
    pub fn new(sampler: Sampler, seed: u64) -> Self {
        Self { sampler, rng: RngStream::new(seed) }
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    /// Same sampler with a fresh stream.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut sampler = self.sampler.clone();
        if let Sampler::FiniteOnce { cursor, .. } = &mut sampler {
            *cursor = 0;
        }
        Self::new(sampler, seed)
    }

    pub fn sample(&mut self) -> Result<(Vector, f64)> {
        match &mut self.sampler {
            Sampler::Synthetic { cov_factor, theta, noise_sd } => {
                let z = self.rng.normal_vector(cov_factor.ncols());
                let x = &*cov_factor * z;
                let eps = self.rng.normal();
                let y = x.dot(theta) + *noise_sd * eps;
                Ok((x, y))
            }
            Sampler::Finite { rows, labels } => {
                if rows.is_empty() {
                    return Err(Error::EmptyDataset);
                }
                let i = self.rng.index(rows.len());
                Ok((rows[i].clone(), labels[i]))
            }
            Sampler::FiniteOnce { rows, labels, cursor } => {
                if *cursor >= rows.len() {
                    return Err(Error::Exhausted(rows.len()));
                }
                let i = *cursor;
                *cursor += 1;
                Ok((rows[i].clone(), labels[i]))
            }
        }
    }

    /// Noise level `σ` for synthetic streams.
    pub fn noise_sd(&self) -> Option<f64> {
        match &self.sampler {
            Sampler::Synthetic { noise_sd, .. } => Some(*noise_sd),
            _ => None,
        }
    }
}

/// `(⟨x, θ⟩ - y) x`.
pub fn sample_ls_gradient(x: &Vector, y: f64, theta: &Vector) -> Vector {
    x * (x.dot(theta) - y)
}

impl GradientOracle for LeastSquaresStream {
    fn dim(&self) -> usize {
        match &self.sampler {
            Sampler::Synthetic { cov_factor, .. } => cov_factor.nrows(),
            Sampler::Finite { rows, .. } | Sampler::FiniteOnce { rows, .. } => rows.first().map_or(0, |r| r.len()),
        }
    }

    fn gradient(&mut self, theta: &Vector) -> Result<Vector> {
        let (x, y) = self.sample()?;
        check_dim(x.len(), theta.len())?;
        Ok(sample_ls_gradient(&x, y, theta))
    }

    fn seed(&self) -> Option<u64> {
        Some(self.rng.seed())
    }
}
