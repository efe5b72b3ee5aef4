//! Composite terms `g` and the closed-form maps
//! `θ = argmin_θ { -⟨η, θ⟩ + h(θ) + τ g(θ) }` for every supported pairing.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{h_grad_conjugate, Geometry};
use crate::numerics::{check_dim, mahalanobis_sq, SpdMatrix, Vector};

/// Tolerance for membership in an indicator's set.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Tolerance used by [`subgradient_witness`].
pub const WITNESS_TOL: f64 = 1e-7;

/// Curvature of a [`Regularizer::QuadraticL2`] term.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadraticWeight {
    /// `g = (ν/2)‖θ - c‖₂²`.
    Scalar(f64),
    /// `g = ½⟨θ - c, Q(θ - c)⟩`.
    Matrix(SpdMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Regularizer {
    Zero,
    IndicatorSimplex { radius: f64 },
    IndicatorL2Ball { radius: f64 },
    L1 { lambda: f64 },
    QuadraticL2 { weight: QuadraticWeight, center: Option<Vector> },
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Zero => write!(f, "none"),
            Regularizer::IndicatorSimplex { radius } => write!(f, "simplex:{radius}"),
            Regularizer::IndicatorL2Ball { radius } => write!(f, "ball:{radius}"),
            Regularizer::L1 { lambda } => write!(f, "l1:{lambda}"),
            Regularizer::QuadraticL2 { weight: QuadraticWeight::Scalar(nu), .. } => write!(f, "l2:{nu}"),
            Regularizer::QuadraticL2 { .. } => write!(f, "l2:matrix"),
        }
    }
}

impl Regularizer {
    pub fn simplex(radius: f64) -> Result<Self> {
        positive("simplex radius", radius)?;
        Ok(Regularizer::IndicatorSimplex { radius })
    }

    pub fn l2_ball(radius: f64) -> Result<Self> {
        positive("ball radius", radius)?;
        Ok(Regularizer::IndicatorL2Ball { radius })
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        nonnegative("l1 weight", lambda)?;
        Ok(Regularizer::L1 { lambda })
    }

    /// `(ν/2)‖θ - center‖₂²`.
    pub fn ridge(nu: f64, center: Option<Vector>) -> Result<Self> {
        nonnegative("l2 weight", nu)?;
        Ok(Regularizer::QuadraticL2 { weight: QuadraticWeight::Scalar(nu), center })
    }

    /// `½⟨θ - center, Q(θ - center)⟩`.
    pub fn quadratic(q: SpdMatrix, center: Option<Vector>) -> Self {
        Regularizer::QuadraticL2 { weight: QuadraticWeight::Matrix(q), center }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Zero => "zero",
            Regularizer::IndicatorSimplex { .. } => "simplex",
            Regularizer::IndicatorL2Ball { .. } => "l2-ball",
            Regularizer::L1 { .. } => "l1",
            Regularizer::QuadraticL2 { .. } => "quadratic-l2",
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Regularizer::IndicatorSimplex { .. } | Regularizer::IndicatorL2Ball { .. })
    }

    /// Twice-differentiable variants (usable in continuous-time flows).
    pub fn is_smooth(&self) -> bool {
        matches!(self, Regularizer::Zero | Regularizer::QuadraticL2 { .. })
    }

    /// `∇g(θ)` for the smooth variants.
    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        match self {
            Regularizer::Zero => Ok(Vector::zeros(theta.len())),
            Regularizer::QuadraticL2 { weight, center } => {
                let diff = centered(theta, center.as_ref())?;
                match weight {
                    QuadraticWeight::Scalar(nu) => Ok(diff * *nu),
                    QuadraticWeight::Matrix(q) => q.mul_vec(&diff),
                }
            }
            _ => Err(Error::InvalidParameter(format!("{} is not differentiable", self.name()))),
        }
    }
}

fn positive(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {x}")))
    }
}

fn nonnegative(what: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be nonnegative, got {x}")))
    }
}

fn centered(theta: &Vector, center: Option<&Vector>) -> Result<Vector> {
    match center {
        Some(c) => {
            check_dim(c.len(), theta.len())?;
            Ok(theta - c)
        }
        None => Ok(theta.clone()),
    }
}

fn in_simplex(theta: &Vector, radius: f64) -> bool {
    theta.iter().all(|&x| x >= -FEASIBILITY_TOL)
        && (theta.sum() - radius).abs() <= FEASIBILITY_TOL * radius.max(1.0)
}

fn in_ball(theta: &Vector, radius: f64) -> bool {
    theta.norm() <= radius * (1.0 + FEASIBILITY_TOL)
}

/// `g(θ)`; indicators return `+∞` outside their set.
pub fn g_eval(g: &Regularizer, theta: &Vector) -> f64 {
    match g {
        Regularizer::Zero => 0.0,
        Regularizer::IndicatorSimplex { radius } => {
            if in_simplex(theta, *radius) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Regularizer::IndicatorL2Ball { radius } => {
            if in_ball(theta, *radius) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Regularizer::L1 { lambda } => lambda * theta.lp_norm(1),
        Regularizer::QuadraticL2 { weight, center } => {
            let Ok(diff) = centered(theta, center.as_ref()) else {
                return f64::INFINITY;
            };
            match weight {
                QuadraticWeight::Scalar(nu) => 0.5 * nu * diff.norm_squared(),
                QuadraticWeight::Matrix(q) => 0.5 * mahalanobis_sq(q, &diff).unwrap_or(f64::INFINITY),
            }
        }
    }
}

/// Whether `(geom, g)` has a closed-form composite map.
pub fn is_supported(geom: &Geometry, g: &Regularizer) -> bool {
    match geom {
        Geometry::Euclidean => true,
        Geometry::NegativeEntropy => {
            matches!(g, Regularizer::Zero | Regularizer::IndicatorSimplex { .. })
        }
        Geometry::SquaredLpNorm { .. } => matches!(g, Regularizer::Zero | Regularizer::L1 { .. }),
    }
}

pub fn check_supported(geom: &Geometry, g: &Regularizer) -> Result<()> {
    if is_supported(geom, g) {
        Ok(())
    } else {
        Err(Error::UnsupportedPair {
            geometry: geom.name(),
            regularizer: g.name(),
        })
    }
}

/// `sign(η) max(|η| - t, 0)`; ties at the threshold map to exactly zero.
pub fn soft_threshold(eta: &Vector, t: f64) -> Vector {
    eta.map(|x| {
        let m = x.abs() - t;
        if m > 0.0 {
            x.signum() * m
        } else {
            0.0
        }
    })
}

/// Euclidean projection onto `{θ ≥ 0, Σθ(i) = r}` (sort-based pivot).
pub fn project_simplex(eta: &Vector, radius: f64) -> Vector {
    let mut u: Vec<f64> = eta.iter().copied().collect();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            shift = t;
        }
    }
    eta.map(|x| (x - shift).max(0.0))
}

/// `r · softmax(η)` with a max shift; `-∞` entries map to zero.
pub(crate) fn scaled_softmax(eta: &Vector, radius: f64) -> Vector {
    let m = eta.max();
    let w = eta.map(|x| (x - m).exp());
    let s = w.sum();
    w * (radius / s)
}

/// `θ = argmax_θ { ⟨η, θ⟩ - h(θ) - τ g(θ) }`.
///
/// Indicators constrain for every `τ ≥ 0`.
pub fn composite_map(geom: &Geometry, g: &Regularizer, eta: &Vector, tau: f64) -> Result<Vector> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be nonnegative, got {tau}")));
    }
    check_supported(geom, g)?;
    if eta.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("dual point"));
    }
    match (geom, g) {
        (_, Regularizer::Zero) => h_grad_conjugate(geom, eta),
        (Geometry::Euclidean, Regularizer::IndicatorSimplex { radius }) => Ok(project_simplex(eta, *radius)),
        (Geometry::Euclidean, Regularizer::IndicatorL2Ball { radius }) => {
            let n = eta.norm();
            Ok(if n <= *radius { eta.clone() } else { eta * (radius / n) })
        }
        (Geometry::Euclidean, Regularizer::L1 { lambda }) => Ok(soft_threshold(eta, tau * lambda)),
        (Geometry::Euclidean, Regularizer::QuadraticL2 { weight, center }) => {
            euclidean_quadratic_map(eta, tau, weight, center.as_ref())
        }
        (Geometry::NegativeEntropy, Regularizer::IndicatorSimplex { radius }) => Ok(scaled_softmax(eta, *radius)),
        (Geometry::SquaredLpNorm { .. }, Regularizer::L1 { lambda }) => {
            h_grad_conjugate(geom, &soft_threshold(eta, tau * lambda))
        }
        _ => unreachable!("support table checked above"),
    }
}

/// `(I + τQ)^{-1}(η + τQc)`.
fn euclidean_quadratic_map(eta: &Vector, tau: f64, weight: &QuadraticWeight, center: Option<&Vector>) -> Result<Vector> {
    if let Some(c) = center {
        check_dim(eta.len(), c.len())?;
    }
    match weight {
        QuadraticWeight::Scalar(nu) => {
            let s = tau * nu;
            let rhs = match center {
                Some(c) => eta + c * s,
                None => eta.clone(),
            };
            Ok(rhs / (1.0 + s))
        }
        QuadraticWeight::Matrix(q) => {
            let rhs = match center {
                Some(c) => eta + q.mul_vec(c)? * tau,
                None => eta.clone(),
            };
            q.shifted_inverse_apply(tau, &rhs)
        }
    }
}

/// Closest point of `∂g(θ)` to `w`, or `None` when `θ ∉ dom g`.
pub fn subdifferential_projection(g: &Regularizer, theta: &Vector, w: &Vector) -> Option<Vector> {
    if theta.len() != w.len() || !g_eval(g, theta).is_finite() {
        return None;
    }
    match g {
        Regularizer::Zero => Some(Vector::zeros(w.len())),
        Regularizer::QuadraticL2 { .. } => g.gradient(theta).ok(),
        Regularizer::L1 { lambda } => Some(Vector::from_fn(w.len(), |i, _| {
            if theta[i] == 0.0 {
                w[i].clamp(-lambda, *lambda)
            } else {
                lambda * theta[i].signum()
            }
        })),
        Regularizer::IndicatorL2Ball { radius } => {
            let n = theta.norm();
            if n < radius * (1.0 - FEASIBILITY_TOL) {
                return Some(Vector::zeros(w.len()));
            }
            // Normal cone is the ray {s θ : s ≥ 0}.
            let s = (w.dot(theta) / (n * n)).max(0.0);
            Some(theta * s)
        }
        Regularizer::IndicatorSimplex { radius } => {
            let floor = 1e-12 * radius.max(1.0);
            let support: Vec<bool> = theta.iter().map(|&x| x > floor).collect();
            let level = simplex_normal_level(w, &support);
            Some(Vector::from_fn(w.len(), |i, _| if support[i] { level } else { w[i].min(level) }))
        }
    }
}

/// Minimizes `Σ_S (w_i - c)² + Σ_{S^c} (w_i - c)_+²` over the scalar `c`.
fn simplex_normal_level(w: &Vector, support: &[bool]) -> f64 {
    let mut on_sum = 0.0;
    let mut on_count = 0usize;
    let mut off: Vec<f64> = Vec::new();
    for (i, &s) in support.iter().enumerate() {
        if s {
            on_sum += w[i];
            on_count += 1;
        } else {
            off.push(w[i]);
        }
    }
    off.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut sum = on_sum;
    let mut count = on_count;
    let mut c = if count > 0 { sum / count as f64 } else { f64::NEG_INFINITY };
    for &x in &off {
        if x > c {
            sum += x;
            count += 1;
            c = sum / count as f64;
        } else {
            break;
        }
    }
    c
}

/// Distance from `w` to `∂g(θ)` (`+∞` outside `dom g`).
pub fn subdifferential_distance(g: &Regularizer, theta: &Vector, w: &Vector) -> f64 {
    match subdifferential_projection(g, theta, w) {
        Some(p) => (w - p).norm(),
        None => f64::INFINITY,
    }
}

/// `v ∈ ∂g(θ)` up to [`WITNESS_TOL`] (scaled by `1 + ‖v‖_∞`).
pub fn subgradient_witness(g: &Regularizer, theta: &Vector, v: &Vector) -> bool {
    subdifferential_distance(g, theta, v) <= WITNESS_TOL * (1.0 + v.amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn g_eval_examples() {
        assert_eq!(g_eval(&Regularizer::l1(2.0).unwrap(), &v(&[1.0, -1.0])), 4.0);
        let s = Regularizer::simplex(1.0).unwrap();
        assert_eq!(g_eval(&s, &v(&[0.5, 0.5])), 0.0);
        assert_eq!(g_eval(&s, &v(&[1.0, 1.0])), f64::INFINITY);
        assert_eq!(g_eval(&Regularizer::l2_ball(1.0).unwrap(), &v(&[2.0, 0.0])), f64::INFINITY);
        let r = Regularizer::ridge(2.0, Some(v(&[1.0, 1.0]))).unwrap();
        assert_eq!(g_eval(&r, &v(&[1.0, 1.0])), 0.0);
        assert_eq!(g_eval(&r, &v(&[2.0, 1.0])), 1.0);
    }

    #[test]
    fn composite_map_examples() {
        let e = Geometry::Euclidean;
        let th = composite_map(&e, &Regularizer::l1(1.0).unwrap(), &v(&[3.0, -0.5]), 1.0).unwrap();
        assert_eq!(th, v(&[2.0, 0.0]));

        let th = composite_map(&Geometry::NegativeEntropy, &Regularizer::simplex(1.0).unwrap(), &v(&[0.0, 0.0]), 3.0).unwrap();
        assert_eq!(th, v(&[0.5, 0.5]));

        let q = Regularizer::quadratic(SpdMatrix::identity(1), None);
        assert_eq!(composite_map(&e, &q, &v(&[2.0]), 1.0).unwrap(), v(&[1.0]));

        for tau in [0.0, 0.3, 100.0] {
            assert_eq!(composite_map(&e, &Regularizer::Zero, &v(&[7.0, -3.0]), tau).unwrap(), v(&[7.0, -3.0]));
        }

        let lp = Geometry::lp(1.5).unwrap();
        let eta = v(&[2.0, -0.2, -3.0]);
        let th = composite_map(&lp, &Regularizer::l1(0.5).unwrap(), &eta, 2.0).unwrap();
        let expect = h_grad_conjugate(&lp, &v(&[1.0, 0.0, -2.0])).unwrap();
        assert_relative_eq!(th, expect, epsilon = 1e-14);
    }

    #[test]
    fn composite_map_errors() {
        let bad = composite_map(&Geometry::NegativeEntropy, &Regularizer::l1(1.0).unwrap(), &v(&[1.0]), 1.0);
        assert!(matches!(bad, Err(Error::UnsupportedPair { .. })));
        let bad = composite_map(&Geometry::lp(1.5).unwrap(), &Regularizer::simplex(1.0).unwrap(), &v(&[1.0]), 1.0);
        assert!(matches!(bad, Err(Error::UnsupportedPair { .. })));
        let neg = composite_map(&Geometry::Euclidean, &Regularizer::Zero, &v(&[1.0]), -1.0);
        assert!(matches!(neg, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn soft_threshold_tie_is_zero() {
        assert_eq!(soft_threshold(&v(&[1.0, -1.0, 1.5]), 1.0), v(&[0.0, 0.0, 0.5]));
    }

    #[test]
    fn simplex_projection_examples() {
        let p = project_simplex(&v(&[0.2, 0.3]), 1.0);
        assert_relative_eq!(p, v(&[0.45, 0.55]), epsilon = 1e-15);
        // brute-force grid along the segment {(t, 1-t)}
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=100_000 {
            let t = k as f64 / 100_000.0;
            let d = (t - 0.2f64).powi(2) + (1.0 - t - 0.3f64).powi(2);
            if d < best.0 {
                best = (d, t);
            }
        }
        assert!((best.1 - p[0]).abs() <= 1e-5);

        let feas = v(&[0.25, 0.5, 0.25]);
        assert_eq!(project_simplex(&feas, 1.0), feas);
        assert_eq!(project_simplex(&v(&[10.0, 0.0]), 1.0), v(&[1.0, 0.0]));
        let p = project_simplex(&v(&[3.0, -1.0, 0.7, 2.9]), 2.5);
        assert!((p.sum() - 2.5).abs() <= 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn witness_examples() {
        let l1 = Regularizer::l1(1.0).unwrap();
        assert!(subgradient_witness(&l1, &v(&[0.0]), &v(&[0.5])));
        assert!(subgradient_witness(&l1, &v(&[2.0]), &v(&[1.0])));
        assert!(!subgradient_witness(&l1, &v(&[2.0]), &v(&[0.5])));
        assert!(!subgradient_witness(&l1, &v(&[0.0]), &v(&[1.5])));

        let s = Regularizer::simplex(1.0).unwrap();
        // θ on the face {θ3 = 0}: normal cone is {v1 = v2 = c, v3 ≤ c}
        let th = v(&[0.4, 0.6, 0.0]);
        assert!(subgradient_witness(&s, &th, &v(&[1.0, 1.0, -3.0])));
        assert!(!subgradient_witness(&s, &th, &v(&[1.0, 1.0, 2.0])));
        assert!(!subgradient_witness(&s, &th, &v(&[1.0, 0.0, 0.0])));
        // infeasible θ
        assert!(!subgradient_witness(&s, &v(&[1.0, 1.0, 0.0]), &v(&[0.0, 0.0, 0.0])));

        let b = Regularizer::l2_ball(1.0).unwrap();
        assert!(subgradient_witness(&b, &v(&[0.6, 0.8]), &v(&[1.2, 1.6])));
        assert!(!subgradient_witness(&b, &v(&[0.6, 0.8]), &v(&[-1.2, -1.6])));
        assert!(subgradient_witness(&b, &v(&[0.1, 0.1]), &v(&[0.0, 0.0])));
    }

    #[test]
    fn simplex_level_matches_scan() {
        let w = v(&[0.3, 0.1, 0.9, -2.0]);
        let support = [true, true, false, false];
        let c = simplex_normal_level(&w, &support);
        let obj = |c: f64| {
            (0.3 - c).powi(2) + (0.1 - c).powi(2) + (0.9 - c).max(0.0).powi(2) + (-2.0 - c).max(0.0).powi(2)
        };
        for k in -300..300 {
            let t = k as f64 / 100.0;
            assert!(obj(c) <= obj(t) + 1e-12);
        }
    }
}
