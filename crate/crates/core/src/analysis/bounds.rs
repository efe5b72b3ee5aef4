use crate::error::{Error, Result};
use crate::geometry::{h_grad, spectral_q_moment, Geometry};
use crate::numerics::{Matrix, SpdMatrix, Vector};
use crate::regularizer::Regularizer;

/// Condition number above which the `Σ^{-1}`-norm of the dual distance is
/// considered unreliable.
pub const DUAL_DISTANCE_MAX_CONDITION: f64 = 1e12;

/// Problem constants entering the upper bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    /// `D_h(θ_*, θ_0)`.
    pub bregman: f64,
    pub gamma: f64,
    pub n: u64,
    /// `‖∇h(θ_0) - ∇h(θ_*)‖²_{Σ^{-1}}`, when available.
    pub dual_distance_sq: Option<f64>,
    /// `tr Σ^{-1} C`.
    pub trace_sigma_inv_c: f64,
    /// `tr C Σ^{-b}`.
    pub trace_c_sigma_neg_b: f64,
    /// `tr Σ^{1-b}`.
    pub trace_sigma_one_minus_b: f64,
    pub sigma_sq: f64,
    pub kappa: f64,
    pub d: usize,
    /// Relative smoothness constant `L` of `½‖·‖²_Σ` with respect to `h`.
    pub smoothness: f64,
    pub mu_b: f64,
    pub b: f64,
    pub g_theta0: f64,
    /// `‖θ_* - θ_Σ‖²_Σ`.
    pub misspecification: f64,
    pub mu_h: f64,
    pub r_sq: f64,
}

impl BoundInputs {
    /// Inputs with every optional constant zero, `κ = 3`, `b = 1`, `μ_b = 1`.
    pub fn new(bregman: f64, gamma: f64, n: u64) -> Self {
        Self {
            bregman,
            gamma,
            n,
            dual_distance_sq: None,
            trace_sigma_inv_c: 0.0,
            trace_c_sigma_neg_b: 0.0,
            trace_sigma_one_minus_b: 0.0,
            sigma_sq: 0.0,
            kappa: 3.0,
            d: 1,
            smoothness: 0.0,
            mu_b: 1.0,
            b: 1.0,
            g_theta0: 0.0,
            misspecification: 0.0,
            mu_h: 1.0,
            r_sq: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("step-size must be positive, got {}", self.gamma)));
        }
        let nonneg = [
            ("bregman", self.bregman),
            ("trace_sigma_inv_c", self.trace_sigma_inv_c),
            ("trace_c_sigma_neg_b", self.trace_c_sigma_neg_b),
            ("trace_sigma_one_minus_b", self.trace_sigma_one_minus_b),
            ("sigma_sq", self.sigma_sq),
            ("kappa", self.kappa),
            ("smoothness", self.smoothness),
            ("mu_b", self.mu_b),
            ("g_theta0", self.g_theta0),
            ("misspecification", self.misspecification),
            ("mu_h", self.mu_h),
            ("r_sq", self.r_sq),
        ];
        if let Some((name, x)) = nonneg.iter().find(|(_, x)| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {x}")));
        }
        if self.dual_distance_sq.is_some_and(|x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter("dual distance must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParameter(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// `D_h/(γ(n+1))`.
pub fn bound_prop1(bregman: f64, gamma: f64, n: u64) -> f64 {
    bregman / (gamma * (n + 1) as f64)
}

/// `(1 - γμ)^n D_h/γ`, valid for `0 < γμ ≤ 1`.
pub fn bound_prop1_linear(bregman: f64, gamma: f64, mu: f64, n: u64) -> Result<f64> {
    let rate = gamma * mu;
    if !(rate > 0.0 && rate <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("need 0 < γμ ≤ 1, got {rate}")));
    }
    let contraction = (1.0 - rate).max(0.0);
    Ok(contraction.powi(n.min(i32::MAX as u64) as i32) * bregman / gamma)
}

/// `2 min{D_h/(γn), dual/(γn)²} + (4/n) tr Σ^{-1}C`.
pub fn bound_prop2(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let n = inp.n.max(1) as f64;
    let gn = inp.gamma * n;
    let primal = inp.bregman / gn;
    let bias = inp.dual_distance_sq.map_or(primal, |dual| primal.min(dual / (gn * gn)));
    Ok(2.0 * bias + 4.0 * inp.trace_sigma_inv_c / n)
}

/// Iteration count `dual/(γ D_h)` past which the accelerated bias term of
/// [`bound_prop2`] is the smaller one.
pub fn prop2_crossover(bregman: f64, dual_distance_sq: f64, gamma: f64) -> f64 {
    dual_distance_sq / (gamma * bregman)
}

/// `2D/(γn) + (32d/n)(σ² + κ‖θ_* - θ_Σ‖²_Σ) + (16κd/n²)(5D/γ + g(θ_0))`.
pub fn bound_prop3(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let limit = 1.0 / (4.0 * inp.kappa * inp.smoothness * inp.d as f64);
    if inp.smoothness > 0.0 && inp.gamma > limit {
        log::warn!("step-size {:e} exceeds 1/(4κLd) = {limit:e}; the bound is not certified", inp.gamma);
    }
    let n = inp.n.max(1) as f64;
    let d = inp.d as f64;
    let (k, dg) = (inp.kappa, inp.bregman / inp.gamma);
    Ok(2.0 * dg / n
        + 32.0 * d / n * (inp.sigma_sq + k * inp.misspecification)
        + 16.0 * k * d / (n * n) * (5.0 * dg + inp.g_theta0))
}

/// General-`b` form, term by term:
/// `2D/(γn) + (24/n) tr Σ^{-1}C + (16κdγ/(nμ_b)) tr CΣ^{-b}
///  + (8κd/n)(4κγ tr Σ^{1-b}/μ_b + 3)‖θ_* - θ_Σ‖²_Σ + 80κdD/(γn²) + 16κd g(θ_0)/n²`.
pub fn bound_prop6(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    if !(inp.mu_b > 0.0) {
        return Err(Error::InvalidParameter("mu_b must be positive".into()));
    }
    let n = inp.n.max(1) as f64;
    let (k, d, g) = (inp.kappa, inp.d as f64, inp.gamma);
    Ok(2.0 * inp.bregman / (g * n)
        + 24.0 / n * inp.trace_sigma_inv_c
        + 16.0 * k * d * g / (n * inp.mu_b) * inp.trace_c_sigma_neg_b
        + 8.0 * k * d / n * (4.0 * k * g * inp.trace_sigma_one_minus_b / inp.mu_b + 3.0) * inp.misspecification
        + 80.0 * k * d * inp.bregman / (g * n * n)
        + 16.0 * k * d * inp.g_theta0 / (n * n))
}

/// Euclidean-behaved `h`:
/// `2D/(γn) + (8/n)(3 + 4γκR²/μ_h)(σ²d + κd‖θ_* - θ_Σ‖²_Σ) + (16κd/n²)(5D/γ + g(θ_0))`.
pub fn bound_euclidean_corollary(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    if !(inp.mu_h > 0.0) {
        return Err(Error::InvalidParameter("mu_h must be positive".into()));
    }
    let n = inp.n.max(1) as f64;
    let (k, d, g) = (inp.kappa, inp.d as f64, inp.gamma);
    let dg = inp.bregman / g;
    Ok(2.0 * dg / n
        + 8.0 / n * (3.0 + 4.0 * g * k * inp.r_sq / inp.mu_h) * (inp.sigma_sq * d + k * d * inp.misspecification)
        + 16.0 * k * d / (n * n) * (5.0 * dg + inp.g_theta0))
}

/// `‖∇h(θ_0) - ∇h(θ_*)‖²_{Σ^{-1}}`, or `None` when a gradient is not finite
/// or `Σ` is too ill-conditioned.
pub fn dual_distance_sq(geom: &Geometry, sigma: &SpdMatrix, theta0: &Vector, theta_star: &Vector) -> Option<f64> {
    if sigma.condition_number() >= DUAL_DISTANCE_MAX_CONDITION {
        return None;
    }
    let diff = h_grad(geom, theta0).ok()? - h_grad(geom, theta_star).ok()?;
    if diff.iter().any(|x| !x.is_finite()) {
        return None;
    }
    sigma.inverse_quadratic_form(&diff).ok()
}

/// `tr Σ^{-1} C`.
pub fn trace_sigma_inv_c(sigma: &SpdMatrix, c: &Matrix) -> f64 {
    (sigma.power(-1.0) * c).trace()
}

/// `tr C Σ^{-b}`.
pub fn trace_c_sigma_pow(sigma: &SpdMatrix, c: &Matrix, b: f64) -> f64 {
    (c * sigma.power(-b)).trace()
}

/// `tr Σ^{1-b}`.
pub fn trace_sigma_pow(sigma: &SpdMatrix, b: f64) -> f64 {
    sigma.eigenvalues().iter().map(|l| l.powf(1.0 - b)).sum()
}

/// Relative smoothness `L` such that `L h - ½‖·‖²_Σ` is convex on the
/// relevant domain.
///
/// * Euclidean: `λ_max(Σ)`.
/// * Entropy on the simplex of radius `r`: `r max_ij |Σ_ij|` (`r = 1` without a constraint).
/// * `ℓp`: `E‖x‖_q²` over the spectral design of `Σ` (the potential
///   `‖θ‖_p²/(2(p-1))` is already 1-strongly convex in `‖·‖_p`).
pub fn smoothness_constant(geom: &Geometry, g: &Regularizer, sigma: &SpdMatrix) -> f64 {
    match geom {
        Geometry::Euclidean => sigma.max_eigenvalue(),
        Geometry::NegativeEntropy => {
            let r = match g {
                Regularizer::IndicatorSimplex { radius } => *radius,
                _ => 1.0,
            };
            r * sigma.max_abs_entry()
        }
        Geometry::SquaredLpNorm { q, .. } => spectral_q_moment(*q, sigma),
    }
}

/// Kurtosis constant `κ = max_z E⟨z, x⟩⁴ / ⟨z, Σz⟩²` estimated over
/// `directions` (Gaussian designs give 3).
pub fn estimate_kurtosis(design: &[Vector], directions: &[Vector]) -> Result<f64> {
    if design.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = design.len() as f64;
    let mut best: f64 = 0.0;
    for z in directions {
        let (mut m2, mut m4) = (0.0, 0.0);
        for x in design {
            let s = x.dot(z);
            let s2 = s * s;
            m2 += s2;
            m4 += s2 * s2;
        }
        let (m2, m4) = (m2 / n, m4 / n);
        if m2 > 0.0 {
            best = best.max(m4 / (m2 * m2));
        }
    }
    Ok(best)
}

/// `((L_g + 1)/2)‖θ̄ - θ_*‖²_Σ` with `L_g` the smallest constant making
/// `L_g f - g` convex.
pub fn smooth_conversion_bound(l_g: f64, mahalanobis_sq: f64) -> f64 {
    0.5 * (l_g + 1.0) * mahalanobis_sq
}

/// `L_g = λ_max(Σ^{-1/2} Q Σ^{-1/2})` for `g = ½⟨θ - c, Q(θ - c)⟩`.
pub fn quadratic_relative_smoothness(sigma: &SpdMatrix, q: &Matrix) -> Result<f64> {
    let s = sigma.power(-0.5);
    let m = &s * q * &s;
    let m = (&m + m.transpose()) * 0.5;
    Ok(m.symmetric_eigenvalues().max())
}

/// Constrained conversion `‖θ_* - θ_Σ‖_Σ ‖θ̄ - θ_*‖_Σ + ½‖θ̄ - θ_*‖²_Σ`
/// bounding `f(θ̄) - f(θ_*)` for feasible `θ̄`.
pub fn constrained_conversion_bound(misspecification_norm: f64, mahalanobis_sq: f64) -> f64 {
    misspecification_norm * mahalanobis_sq.sqrt() + 0.5 * mahalanobis_sq
}
