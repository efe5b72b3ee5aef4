//! Continuous-time mirror-descent and dual-averaging flows
//!
//! * MD: `θ' = -∇²h(θ)^{-1} (∇f(θ) + ∇g(θ))`
//! * DA: `θ' = -(∇²h(θ) + t ∇²g)^{-1} (∇f(θ) + ∇g(θ))`
//!
//! integrated with classical RK4 at a fixed step; a step whose stages leave
//! the interior of `dom h` is split in halves down to [`DT_MIN`].

use crate::error::{Error, Result};
use crate::geometry::{bregman, h_hessian, lp_hessian_parts, Geometry};
use crate::numerics::{check_dim, lp_norm, spd_solve, Matrix, SpdMatrix, Vector};
use crate::problems::QuadraticProblem;
use crate::regularizer::{g_eval, QuadraticWeight, Regularizer};

pub const DT_MIN: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub geometry: Geometry,
    /// Smooth part `f`; `None` means `f = 0`.
    pub f: Option<QuadraticProblem>,
    /// `Zero` or `QuadraticL2`.
    pub g: Regularizer,
    pub t_end: f64,
    pub dt: f64,
    pub theta0: Vector,
}

impl FlowSpec {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !self.g.is_smooth() {
            return Err(Error::InvalidParameter(format!("flow needs a twice-differentiable g, got {}", self.g)));
        }
        if let Some(f) = &self.f {
            check_dim(f.dim(), self.theta0.len())?;
        }
        if !self.geometry.in_interior(&self.theta0) {
            return Err(Error::Domain(self.geometry.name()));
        }
        Ok(())
    }

    fn grad(&self, theta: &Vector) -> Result<Vector> {
        let mut v = self.g.gradient(theta)?;
        if let Some(f) = &self.f {
            v += f.full_gradient(theta)?;
        }
        Ok(v)
    }

    /// `∇²g` as a dense matrix, or `None` for `g = 0`.
    fn g_hessian(&self, d: usize) -> Option<Matrix> {
        match &self.g {
            Regularizer::QuadraticL2 { weight: QuadraticWeight::Scalar(nu), .. } => {
                Some(Matrix::identity(d, d) * *nu)
            }
            Regularizer::QuadraticL2 { weight: QuadraticWeight::Matrix(q), .. } => Some(q.matrix().clone()),
            _ => None,
        }
    }

    /// Minimizer of `f + g`, from `(Σ + ∇²g) θ = q + ∇²g c`.
    pub fn minimizer(&self) -> Result<Vector> {
        let d = self.theta0.len();
        let mut h = Matrix::zeros(d, d);
        let mut rhs = Vector::zeros(d);
        if let Some(f) = &self.f {
            h += f.sigma().matrix();
            rhs += f.q();
        }
        if let Some(gh) = self.g_hessian(d) {
            if let Regularizer::QuadraticL2 { center: Some(c), .. } = &self.g {
                rhs += &gh * c;
            }
            h += gh;
        }
        spd_solve(&SpdMatrix::new(h)?, &rhs)
    }
}

/// Sampled trajectory with its Lyapunov values.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// `D_h(θ_*, θ(t))` for MD, `D_{h+tg}(θ_*, θ(t))` for DA.
    pub lyapunov: Vec<f64>,
    pub theta_star: Vector,
}

impl FlowTrace {
    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trace holds the initial state")
    }

    /// Largest increase `V(t_{k+1}) - V(t_k) - tol (1 + V(t_k))`; nonpositive
    /// when the Lyapunov values decrease within `tol`.
    pub fn max_lyapunov_excess(&self, tol: f64) -> f64 {
        self.lyapunov
            .windows(2)
            .map(|w| w[1] - w[0] - tol * (1.0 + w[0].abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First sampled time at which `values` drops to `level` or below.
    pub fn first_time_at_or_below(&self, values: &[f64], level: f64) -> Option<f64> {
        self.times.iter().zip(values).find(|(_, &v)| v <= level).map(|(&t, _)| t)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flow {
    Mirror,
    Dual,
}

/// `(∇²h(θ) + t G)^{-1} w`.
fn metric_solve(geom: &Geometry, theta: &Vector, g_hess: Option<(&Matrix, f64)>, w: &Vector) -> Result<Vector> {
    let shift = g_hess.filter(|(_, t)| *t != 0.0);
    match (geom, shift) {
        (Geometry::Euclidean, None) => Ok(w.clone()),
        (Geometry::NegativeEntropy, None) => {
            if !geom.in_interior(theta) {
                return Err(Error::Domain("negative entropy"));
            }
            Ok(theta.component_mul(w))
        }
        (Geometry::SquaredLpNorm { p, .. }, None) => {
            // Rank-one update of the diagonal inverse (|θ|/N)^{2-p}:
            // D^{-1}v = θ/N and vᵀD^{-1}v = 1.
            let n = lp_norm(theta, *p);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::Domain("lp hessian at the origin"));
            }
            let s = theta / n;
            let dinv = theta.map(|x| (x.abs() / n).powf(2.0 - p));
            Ok(dinv.component_mul(w) - &s * ((2.0 - p) * s.dot(w)))
        }
        (_, Some((gh, t))) => {
            let m = hessian(geom, theta)? + gh * t;
            spd_solve(&SpdMatrix::new((&m + m.transpose()) * 0.5)?, w)
        }
    }
}

fn hessian(geom: &Geometry, theta: &Vector) -> Result<Matrix> {
    if let Geometry::SquaredLpNorm { p, .. } = geom {
        // Validates the origin before forming the dense matrix.
        lp_hessian_parts(*p, theta)?;
    }
    h_hessian(geom, theta)
}

struct Integrator<'a> {
    spec: &'a FlowSpec,
    flow: Flow,
    g_hess: Option<Matrix>,
}

impl Integrator<'_> {
    fn field(&self, t: f64, theta: &Vector) -> Result<Vector> {
        if !self.spec.geometry.in_interior(theta) {
            return Err(Error::Domain(self.spec.geometry.name()));
        }
        let grad = self.spec.grad(theta)?;
        let shift = match self.flow {
            Flow::Mirror => None,
            Flow::Dual => self.g_hess.as_ref().map(|m| (m, t)),
        };
        Ok(-metric_solve(&self.spec.geometry, theta, shift, &grad)?)
    }

    fn rk4(&self, t: f64, theta: &Vector, h: f64) -> Result<Vector> {
        let k1 = self.field(t, theta)?;
        let k2 = self.field(t + h / 2.0, &(theta + &k1 * (h / 2.0)))?;
        let k3 = self.field(t + h / 2.0, &(theta + &k2 * (h / 2.0)))?;
        let k4 = self.field(t + h, &(theta + &k3 * h))?;
        let next = theta + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !self.spec.geometry.in_interior(&next) {
            return Err(Error::Domain(self.spec.geometry.name()));
        }
        Ok(next)
    }

    /// Advances by `h`, halving on domain violations.
    fn advance(&self, t: f64, theta: &Vector, h: f64) -> Result<Vector> {
        match self.rk4(t, theta, h) {
            Ok(next) => Ok(next),
            Err(Error::Domain(_)) if h / 2.0 >= DT_MIN => {
                let mid = self.advance(t, theta, h / 2.0)?;
                self.advance(t + h / 2.0, &mid, h / 2.0)
            }
            Err(e) => Err(e),
        }
    }

    fn lyapunov(&self, t: f64, theta_star: &Vector, theta: &Vector) -> Result<f64> {
        let dh = bregman(&self.spec.geometry, theta_star, theta)?;
        if self.flow == Flow::Mirror || t == 0.0 {
            return Ok(dh);
        }
        let g = &self.spec.g;
        let dg = g_eval(g, theta_star) - g_eval(g, theta) - g.gradient(theta)?.dot(&(theta_star - theta));
        Ok(dh + t * dg.max(0.0))
    }

    fn run(&self) -> Result<FlowTrace> {
        self.spec.validate()?;
        let theta_star = self.spec.minimizer()?;
        let steps = (self.spec.t_end / self.spec.dt).round() as u64;
        let mut theta = self.spec.theta0.clone();
        let mut trace = FlowTrace {
            times: vec![0.0],
            lyapunov: vec![self.lyapunov(0.0, &theta_star, &theta)?],
            states: vec![theta.clone()],
            theta_star: theta_star.clone(),
        };
        for k in 0..steps {
            let t = k as f64 * self.spec.dt;
            theta = self.advance(t, &theta, self.spec.dt)?;
            let t_next = (k + 1) as f64 * self.spec.dt;
            trace.lyapunov.push(self.lyapunov(t_next, &theta_star, &theta)?);
            trace.times.push(t_next);
            trace.states.push(theta.clone());
        }
        Ok(trace)
    }
}

pub fn integrate_md_flow(spec: &FlowSpec) -> Result<FlowTrace> {
    Integrator { spec, flow: Flow::Mirror, g_hess: None }.run()
}

pub fn integrate_da_flow(spec: &FlowSpec) -> Result<FlowTrace> {
    let g_hess = spec.g_hessian(spec.theta0.len());
    Integrator { spec, flow: Flow::Dual, g_hess }.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn scalar_f() -> QuadraticProblem {
        QuadraticProblem::new(SpdMatrix::identity(1), v(&[0.0])).unwrap()
    }

    fn spec(geometry: Geometry, f: Option<QuadraticProblem>, g: Regularizer, t_end: f64, dt: f64, theta0: Vector) -> FlowSpec {
        FlowSpec { geometry, f, g, t_end, dt, theta0 }
    }

    #[test]
    fn exponential_decay() {
        let s = spec(Geometry::Euclidean, Some(scalar_f()), Regularizer::Zero, 1.0, 0.01, v(&[1.0]));
        let t = integrate_md_flow(&s).unwrap();
        assert!((t.final_state()[0] - (-1.0f64).exp()).abs() <= 1e-6);
        assert_eq!(*t.times.last().unwrap(), 1.0);
    }

    #[test]
    fn equilibrium_is_constant() {
        let p = QuadraticProblem::from_minimizer(SpdMatrix::identity(2), v(&[0.3, 0.7])).unwrap();
        for geom in [Geometry::Euclidean, Geometry::NegativeEntropy, Geometry::lp(1.5).unwrap()] {
            let s = spec(geom, Some(p.clone()), Regularizer::Zero, 1.0, 0.1, v(&[0.3, 0.7]));
            let t = integrate_md_flow(&s).unwrap();
            assert!(t.states.iter().all(|x| (x - v(&[0.3, 0.7])).norm() <= 1e-14));
        }
    }

    #[test]
    fn matrix_exponential_solution() {
        let mut rng = RngStream::new(6);
        let a = rng.normal_matrix(3, 3);
        let sigma = SpdMatrix::new(&a * a.transpose() + Matrix::identity(3, 3) * 0.2).unwrap();
        let p = QuadraticProblem::new(sigma.clone(), rng.normal_vector(3)).unwrap();
        let theta0 = rng.normal_vector(3);
        let s = spec(Geometry::Euclidean, Some(p.clone()), Regularizer::Zero, 2.0, 1e-3, theta0.clone());
        let t = integrate_md_flow(&s).unwrap();
        let u = sigma.eigenvectors();
        let decay = Matrix::from_diagonal(&sigma.eigenvalues().map(|l| (-l * 2.0).exp()));
        let exact = p.theta_sigma() + u * decay * u.transpose() * (&theta0 - p.theta_sigma());
        assert!((t.final_state() - exact).norm() <= 1e-6);
    }

    #[test]
    fn da_flow_scalar_closed_form() {
        let g = Regularizer::ridge(1.0, None).unwrap();
        let s = spec(Geometry::Euclidean, None, g, 9.0, 1e-3, v(&[2.0]));
        let t = integrate_da_flow(&s).unwrap();
        assert!((t.final_state()[0] - 0.2).abs() <= 1e-6);
        assert!(t.max_lyapunov_excess(10.0 * 1e-12) <= 0.0);
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |dt: f64| {
            let s = spec(Geometry::Euclidean, Some(scalar_f()), Regularizer::Zero, 1.0, dt, v(&[1.0]));
            (integrate_md_flow(&s).unwrap().final_state()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((ratio / 16.0 - 1.0).abs() <= 0.3, "ratio {ratio}");

        let g = Regularizer::ridge(1.0, None).unwrap();
        let err = |dt: f64| {
            // θ' = -2θ/(1 + t), so θ(t) = (1 + t)^{-2}.
            let s = spec(Geometry::Euclidean, Some(scalar_f()), g.clone(), 4.0, dt, v(&[1.0]));
            (integrate_da_flow(&s).unwrap().final_state()[0] - 1.0 / 25.0).abs()
        };
        let ratio = err(0.4) / err(0.2);
        assert!((ratio / 16.0 - 1.0).abs() <= 0.3, "ratio {ratio}");
    }

    #[test]
    fn lyapunov_monotone_across_geometries() {
        let mut rng = RngStream::new(2);
        let a = rng.normal_matrix(3, 3);
        let sigma = SpdMatrix::new(&a * a.transpose() / 3.0 + Matrix::identity(3, 3) * 0.1).unwrap();
        let p = QuadraticProblem::from_minimizer(sigma, v(&[0.2, 0.5, 0.9])).unwrap();
        let dt = 0.01;
        for geom in [Geometry::Euclidean, Geometry::NegativeEntropy, Geometry::lp(1.5).unwrap()] {
            for g in [Regularizer::Zero, Regularizer::ridge(0.5, Some(v(&[0.3, 0.3, 0.3]))).unwrap()] {
                let s = spec(geom, Some(p.clone()), g, 5.0, dt, v(&[1.0, 0.4, 0.1]));
                for t in [integrate_md_flow(&s).unwrap(), integrate_da_flow(&s).unwrap()] {
                    assert!(t.max_lyapunov_excess(10.0 * dt.powi(4)) <= 0.0, "{geom} {}", s.g);
                }
            }
        }
    }

    #[test]
    fn flows_agree_without_regularizer() {
        let p = QuadraticProblem::from_minimizer(SpdMatrix::identity(2), v(&[0.4, 0.6])).unwrap();
        for geom in [Geometry::Euclidean, Geometry::NegativeEntropy, Geometry::lp(1.7).unwrap()] {
            let s = spec(geom, Some(p.clone()), Regularizer::Zero, 2.0, 0.01, v(&[0.9, 0.1]));
            let (m, d) = (integrate_md_flow(&s).unwrap(), integrate_da_flow(&s).unwrap());
            for (a, b) in m.states.iter().zip(&d.states) {
                assert!((a - b).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn regularized_da_flow_is_slower() {
        let p = QuadraticProblem::from_minimizer(SpdMatrix::identity(2), v(&[1.0, -1.0])).unwrap();
        let g = Regularizer::ridge(2.0, None).unwrap();
        let s = spec(Geometry::Euclidean, Some(p), g, 10.0, 0.01, v(&[3.0, 3.0]));
        let (m, d) = (integrate_md_flow(&s).unwrap(), integrate_da_flow(&s).unwrap());
        let star = &m.theta_star;
        let dist = |t: &FlowTrace| -> Vec<f64> {
            t.states.iter().map(|x| bregman(&Geometry::Euclidean, star, x).unwrap()).collect()
        };
        let level = 1e-3 * dist(&m)[0];
        let tm = m.first_time_at_or_below(&dist(&m), level).unwrap();
        let td = d.first_time_at_or_below(&dist(&d), level).unwrap();
        assert!(td > tm, "md {tm} da {td}");
    }

    #[test]
    fn rejects_invalid_specs() {
        let f = Some(scalar_f());
        let bad_g = spec(Geometry::Euclidean, f.clone(), Regularizer::l1(1.0).unwrap(), 1.0, 0.1, v(&[1.0]));
        assert!(integrate_md_flow(&bad_g).is_err());
        let bad_dt = spec(Geometry::Euclidean, f.clone(), Regularizer::Zero, 1.0, 0.0, v(&[1.0]));
        assert!(integrate_md_flow(&bad_dt).is_err());
        let outside = spec(Geometry::NegativeEntropy, f, Regularizer::Zero, 1.0, 0.1, v(&[-1.0]));
        assert!(matches!(integrate_md_flow(&outside), Err(Error::Domain(_))));
    }

    #[test]
    fn entropy_flow_halves_steps_near_boundary() {
        // θ' = -θ(θ - θ_Σ) with θ_Σ = 0 drives θ toward the boundary; a
        // coarse step overshoots and must be split.
        let p = QuadraticProblem::from_minimizer(SpdMatrix::identity(1), v(&[0.0])).unwrap();
        let s = spec(Geometry::NegativeEntropy, Some(p), Regularizer::Zero, 4.0, 2.5, v(&[1.0]));
        let t = integrate_md_flow(&s).unwrap();
        assert!(t.final_state()[0] > 0.0);
    }
}
