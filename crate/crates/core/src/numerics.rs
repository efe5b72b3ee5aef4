//! Dense linear-algebra kernels and the seeded random stream.
//!
//! Everything here is dense: problem dimensions stay in the low thousands,
//! and sparse inputs are densified when loaded.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative eigenvalue floor below which a matrix is rejected as singular.
pub const PD_RELATIVE_TOL: f64 = 1e-12;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `‖v‖_p` for `p >= 1`; `p = ∞` gives the max norm.
pub fn lp_norm(v: &Vector, p: f64) -> f64 {
    if p.is_infinite() {
        return v.amax();
    }
    if p == 2.0 {
        return v.norm();
    }
    if p == 1.0 {
        return v.lp_norm(1);
    }
    // Scale by the max entry so large or tiny coordinates do not over/underflow.
    let scale = v.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// Symmetric positive definite matrix with its spectral and Cholesky
/// factorizations computed once at construction.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    mat: Matrix,
    eigenvalues: Vector,
    eigenvectors: Matrix,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    /// Validates symmetry (to `1e-12` relative) and positive definiteness,
    /// then stores the exactly symmetrized matrix.
    pub fn new(mat: Matrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let scale = mat.amax().max(f64::MIN_POSITIVE);
        let asym = (&mat - mat.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min <= PD_RELATIVE_TOL * max {
            return Err(Error::NotPositiveDefinite { min, max });
        }
        let chol = Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite { min, max })?;
        Ok(Self {
            mat: sym,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            chol,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_diagonal(&Vector::from_element(d, 1.0)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &Vector) -> Result<Self> {
        Self::new(Matrix::from_diagonal(diag))
    }

    /// Builds `U diag(λ) Uᵀ` from an orthogonal `U` and a positive spectrum.
    pub fn from_spectrum(u: &Matrix, eigenvalues: &Vector) -> Result<Self> {
        check_dim(u.ncols(), eigenvalues.len())?;
        let scaled = u * Matrix::from_diagonal(eigenvalues);
        Self::new(&scaled * u.transpose())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    /// Eigenvalues, unordered as returned by the symmetric solver.
    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.mat.amax()
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.mat * v)
    }

    /// `A^b` through the cached spectrum.
    pub fn power(&self, b: f64) -> Matrix {
        let lam = self.eigenvalues.map(|l| l.powf(b));
        &self.eigenvectors * Matrix::from_diagonal(&lam) * self.eigenvectors.transpose()
    }

    /// `(I + τ A)^{-1} v` in O(d²) through the cached spectrum.
    pub fn shifted_inverse_apply(&self, tau: f64, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.len())?;
        let mut coords = self.eigenvectors.tr_mul(v);
        for (c, l) in coords.iter_mut().zip(self.eigenvalues.iter()) {
            *c /= 1.0 + tau * l;
        }
        Ok(&self.eigenvectors * coords)
    }

    /// `‖v‖²_{A^{-1}}`.
    pub fn inverse_quadratic_form(&self, v: &Vector) -> Result<f64> {
        let x = spd_solve(self, v)?;
        Ok(v.dot(&x))
    }

    pub fn condition_number(&self) -> f64 {
        self.max_eigenvalue() / self.min_eigenvalue()
    }
}

/// `⟨v, A v⟩`, the squared Mahalanobis norm.
pub fn mahalanobis_sq(a: &SpdMatrix, v: &Vector) -> Result<f64> {
    check_dim(a.dim(), v.len())?;
    // Quadratic forms of an SPD matrix are nonnegative; clamp roundoff.
    Ok(v.dot(&(&a.mat * v)).max(0.0))
}

/// Solves `A x = b` by Cholesky with one step of iterative refinement.
pub fn spd_solve(a: &SpdMatrix, b: &Vector) -> Result<Vector> {
    check_dim(a.dim(), b.len())?;
    let mut x = a.chol.solve(b);
    let r = b - &a.mat * &x;
    x += a.chol.solve(&r);
    check_finite(&x, "spd_solve")?;
    Ok(x)
}

pub fn max_eigenvalue(a: &SpdMatrix) -> f64 {
    a.max_eigenvalue()
}

/// Reproducible random stream: identical seeds give identical sequences.
///
/// Backed by ChaCha8, whose output is specified independently of platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Position in the underlying keystream, in 32-bit words.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn normal_vector(&mut self, d: usize) -> Vector {
        Vector::from_fn(d, |_, _| self.normal())
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        // Column-major fill order is part of the reproducibility contract.
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }
}

/// `mean + F z` with `z` i.i.d. standard normal of dimension `F.ncols()`.
pub fn gaussian_vector(rng: &mut RngStream, mean: &Vector, cov_factor: &Matrix) -> Result<Vector> {
    check_dim(mean.len(), cov_factor.nrows())?;
    let z = rng.normal_vector(cov_factor.ncols());
    Ok(mean + cov_factor * z)
}

/// Neumaier-compensated running sum of vectors.
#[derive(Clone, Debug)]
pub struct CompensatedSum {
    sum: Vector,
    comp: Vector,
}

impl CompensatedSum {
    pub fn zeros(d: usize) -> Self {
        Self {
            sum: Vector::zeros(d),
            comp: Vector::zeros(d),
        }
    }

    pub fn add(&mut self, v: &Vector) {
        for i in 0..self.sum.len() {
            let s = self.sum[i];
            let x = v[i];
            let t = s + x;
            if s.abs() >= x.abs() {
                self.comp[i] += (s - t) + x;
            } else {
                self.comp[i] += (x - t) + s;
            }
            self.sum[i] = t;
        }
    }

    pub fn value(&self) -> Vector {
        &self.sum + &self.comp
    }
}
