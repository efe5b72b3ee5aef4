//! Legendre functions `h`, their gradients and conjugate gradients, Bregman
//! divergences, and the largest step-sizes for which `h - γ f` stays convex.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{check_dim, lp_norm, Matrix, SpdMatrix, Vector};
use crate::regularizer::{composite_map, g_eval, Regularizer};

/// Largest admissible coordinate for the raw entropy conjugate `exp(η - 1)`.
pub const ENTROPY_OVERFLOW_GUARD: f64 = 700.0;

/// The mirror map generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    /// `h = ½‖θ‖₂²`.
    Euclidean,
    /// `h = Σ θ(i) log θ(i)` on the open positive orthant.
    NegativeEntropy,
    /// `h = ‖θ‖_p² / (2(p-1))` for `1 < p ≤ 2`, with `q = p/(p-1)`.
    SquaredLpNorm { p: f64, q: f64 },
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::Euclidean => write!(f, "euclidean"),
            Geometry::NegativeEntropy => write!(f, "entropy"),
            Geometry::SquaredLpNorm { p, .. } => write!(f, "lp:{p}"),
        }
    }
}

impl Geometry {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!("lp geometry needs 1 < p <= 2, got {p}")));
        }
        Ok(Geometry::SquaredLpNorm { p, q: p / (p - 1.0) })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Euclidean => "euclidean",
            Geometry::NegativeEntropy => "entropy",
            Geometry::SquaredLpNorm { .. } => "lp",
        }
    }

    /// True when `θ` lies in the interior of `dom h`.
    pub fn in_interior(&self, theta: &Vector) -> bool {
        match self {
            Geometry::NegativeEntropy => theta.iter().all(|&x| x > 0.0 && x.is_finite()),
            _ => theta.iter().all(|x| x.is_finite()),
        }
    }
}

fn require_positive(theta: &Vector, allow_zero: bool) -> Result<()> {
    let ok = theta
        .iter()
        .all(|&x| x.is_finite() && (x > 0.0 || (allow_zero && x == 0.0)));
    if ok {
        Ok(())
    } else {
        Err(Error::Domain("negative entropy"))
    }
}

/// `h(θ)`. For the entropy, zero coordinates on the boundary are accepted
/// with `0 log 0 = 0` so that divergences to boundary points are defined.
pub fn h_eval(geom: &Geometry, theta: &Vector) -> Result<f64> {
    match geom {
        Geometry::Euclidean => Ok(0.5 * theta.norm_squared()),
        Geometry::NegativeEntropy => {
            require_positive(theta, true)?;
            Ok(theta
                .iter()
                .map(|&x| if x == 0.0 { 0.0 } else { x * x.ln() })
                .sum())
        }
        Geometry::SquaredLpNorm { p, .. } => {
            let n = lp_norm(theta, *p);
            Ok(n * n / (2.0 * (p - 1.0)))
        }
    }
}

/// Gradient of `sign(x)|x|^{r-1} N^{2-r} / (r-1)`-type maps shared by `h` and `h*`.
fn power_map(v: &Vector, r: f64) -> Vector {
    let n = lp_norm(v, r);
    if n == 0.0 {
        return Vector::zeros(v.len());
    }
    v.map(|x| x.signum() * (x.abs() / n).powf(r - 1.0) * n / (r - 1.0))
        .map(|x| if x.is_nan() { 0.0 } else { x })
}

/// `∇h(θ)`. For `SquaredLpNorm` the gradient at `θ = 0` is `0`.
pub fn h_grad(geom: &Geometry, theta: &Vector) -> Result<Vector> {
    match geom {
        Geometry::Euclidean => Ok(theta.clone()),
        Geometry::NegativeEntropy => {
            require_positive(theta, false)?;
            Ok(theta.map(|x| x.ln() + 1.0))
        }
        Geometry::SquaredLpNorm { p, .. } => Ok(power_map(theta, *p)),
    }
}

/// `∇h*(η)`, the inverse of [`h_grad`].
pub fn h_grad_conjugate(geom: &Geometry, eta: &Vector) -> Result<Vector> {
    if eta.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("dual point"));
    }
    match geom {
        Geometry::Euclidean => Ok(eta.clone()),
        Geometry::NegativeEntropy => {
            let m = eta.max();
            if m > ENTROPY_OVERFLOW_GUARD {
                return Err(Error::Overflow(m));
            }
            Ok(eta.map(|x| (x - 1.0).exp()))
        }
        Geometry::SquaredLpNorm { q, .. } => Ok(power_map(eta, *q)),
    }
}

/// `D_h(α, β) = h(α) - h(β) - ⟨∇h(β), α - β⟩`, clamped at zero against roundoff.
pub fn bregman(geom: &Geometry, alpha: &Vector, beta: &Vector) -> Result<f64> {
    check_dim(alpha.len(), beta.len())?;
    let v = match geom {
        Geometry::Euclidean => 0.5 * (alpha - beta).norm_squared(),
        Geometry::NegativeEntropy => {
            require_positive(alpha, true)?;
            require_positive(beta, false)?;
            alpha
                .iter()
                .zip(beta.iter())
                .map(|(&a, &b)| {
                    let t = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
                    t - a + b
                })
                .sum()
        }
        Geometry::SquaredLpNorm { .. } => {
            let gb = h_grad(geom, beta)?;
            h_eval(geom, alpha)? - h_eval(geom, beta)? - gb.dot(&(alpha - beta))
        }
    };
    Ok(v.max(0.0))
}

/// Non-smooth extension `D̃(α, η) = h_τ(α) - h_τ(θ) - ⟨η, α - θ⟩` with
/// `h_τ = h + τ g` and `θ = ∇h_τ*(η)`. Dominates `D_h(α, θ)`.
pub fn generalized_bregman(
    geom: &Geometry,
    g: &Regularizer,
    tau: f64,
    alpha: &Vector,
    eta: &Vector,
) -> Result<f64> {
    let theta = composite_map(geom, g, eta, tau)?;
    let g_alpha = g_eval(g, alpha);
    if !g_alpha.is_finite() {
        return Ok(f64::INFINITY);
    }
    let tg = |v: f64| if tau == 0.0 { 0.0 } else { tau * v };
    let h_alpha = h_eval(geom, alpha)? + tg(g_alpha);
    let h_theta = h_eval(geom, &theta)? + tg(g_eval(g, &theta));
    Ok(h_alpha - h_theta - eta.dot(&(alpha - &theta)))
}

/// Dense Hessian `∇²h(θ)`.
///
/// For the `ℓp` case this is `Diag(u) + a v vᵀ` with
/// `u(i) = (|θ(i)|/N)^{p-2}`, `v(i) = sign(θ(i))|θ(i)|^{p-1} / N^{p-1}`,
/// `a = (2-p)/(p-1)`, `N = ‖θ‖_p`.
pub fn h_hessian(geom: &Geometry, theta: &Vector) -> Result<Matrix> {
    let d = theta.len();
    match geom {
        Geometry::Euclidean => Ok(Matrix::identity(d, d)),
        Geometry::NegativeEntropy => {
            require_positive(theta, false)?;
            Ok(Matrix::from_diagonal(&theta.map(|x| 1.0 / x)))
        }
        Geometry::SquaredLpNorm { p, .. } => {
            let (u, v, a) = lp_hessian_parts(*p, theta)?;
            Ok(Matrix::from_diagonal(&u) + &v * v.transpose() * a)
        }
    }
}

/// Diagonal, rank-one direction and weight of the `ℓp` Hessian.
pub(crate) fn lp_hessian_parts(p: f64, theta: &Vector) -> Result<(Vector, Vector, f64)> {
    let n = lp_norm(theta, p);
    if n == 0.0 {
        return Err(Error::Domain("lp hessian at the origin"));
    }
    let u = theta.map(|x| (x.abs() / n).powf(p - 2.0));
    let v = theta.map(|x| x.signum() * (x.abs() / n).powf(p - 1.0));
    let v = v.map(|x| if x.is_nan() { 0.0 } else { x });
    Ok((u, v, (2.0 - p) / (p - 1.0)))
}

/// `E‖x‖_q²` over the atoms of a design with `Σ = E[x xᵀ]`.
pub fn q_moment(q: f64, design: &[Vector], weights: Option<&[f64]>) -> f64 {
    let n = design.len() as f64;
    design
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let w = weights.map_or(1.0 / n, |w| w[i]);
            let nq = lp_norm(x, q);
            w * nq * nq
        })
        .sum()
}

/// `E‖x‖_q²` for the spectral design `x = √(dλ_i) u_i` with probability `1/d`,
/// which reproduces `Σ` exactly.
pub fn spectral_q_moment(q: f64, sigma: &SpdMatrix) -> f64 {
    let u = sigma.eigenvectors();
    sigma
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let col: Vector = u.column(i).into_owned();
            let nq = lp_norm(&col, q);
            l * nq * nq
        })
        .sum()
}

/// Largest step-size certified by a relative-convexity argument for `Σ`.
///
/// * Euclidean: `1/λ_max(Σ)`.
/// * Entropy: `1/max_ij |Σ_ij|` (unit simplex; see [`max_stepsize_on_simplex`]).
/// * `ℓp`: `1/E‖x‖_q²` for the spectral design of `Σ`.
pub fn max_stepsize(geom: &Geometry, sigma: &SpdMatrix) -> f64 {
    match geom {
        Geometry::Euclidean => 1.0 / sigma.max_eigenvalue(),
        Geometry::NegativeEntropy => 1.0 / sigma.max_abs_entry(),
        Geometry::SquaredLpNorm { q, .. } => 1.0 / spectral_q_moment(*q, sigma),
    }
}

/// Same as [`max_stepsize`], but the `ℓp` rule uses whichever of the spectral
/// design and the supplied sample design gives the smaller moment.
pub fn max_stepsize_with_design(geom: &Geometry, sigma: &SpdMatrix, design: &[Vector]) -> f64 {
    match geom {
        Geometry::SquaredLpNorm { q, .. } if !design.is_empty() => {
            let m = spectral_q_moment(*q, sigma).min(q_moment(*q, design, None));
            1.0 / m
        }
        _ => max_stepsize(geom, sigma),
    }
}

/// `γ ≤ 1/E‖x‖_q²` straight from a design (the `Σ = E x xᵀ` may be singular).
pub fn stepsize_from_design(geom: &Geometry, design: &[Vector]) -> Result<f64> {
    if design.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let q = match geom {
        Geometry::Euclidean => 2.0,
        Geometry::SquaredLpNorm { q, .. } => *q,
        Geometry::NegativeEntropy => f64::INFINITY,
    };
    let m = q_moment(q, design, None);
    if m <= 0.0 {
        return Err(Error::InvalidParameter("design has zero second moment".into()));
    }
    Ok(1.0 / m)
}

/// Entropy on the simplex of radius `r` is `1/r`-strongly convex in `ℓ1`,
/// so the unit-radius rule is divided by `r`. Other geometries are unchanged.
pub fn max_stepsize_on_simplex(geom: &Geometry, sigma: &SpdMatrix, radius: f64) -> f64 {
    match geom {
        Geometry::NegativeEntropy => max_stepsize(geom, sigma) / radius,
        _ => max_stepsize(geom, sigma),
    }
}
