use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream, SpdMatrix, Vector};
use crate::problems::LinearNoiseOracle;
use crate::regularizer::{QuadraticWeight, Regularizer};

/// Which iterates `E⟨θ̄_n, Aθ̄_n⟩` averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AveragingWindow {
    /// `(1/n) Σ_{k=1}^{n} θ_k`: the double sum with `j, k` up to `n`.
    #[default]
    Shifted,
    /// `(1/n) Σ_{k=0}^{n-1} θ_k`, the optimizer's own average.
    Standard,
}

/// Linear objective with zero slope, noisy gradients of covariance
/// `σ²L I`, and the quadratic regularizer `½⟨θ, Aθ⟩` with
/// `A = diag(L, …, L, μ)`, `μ = L/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundInstance {
    pub d: usize,
    pub l: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub horizon: u64,
}

impl LowerBoundInstance {
    pub fn new(d: usize, l: f64, gamma: f64, sigma: f64, horizon: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("lower-bound instance needs d ≥ 2".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        for (name, x) in [("L", l), ("gamma", gamma), ("sigma", sigma)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(Self { d, l, gamma, sigma, horizon })
    }

    pub fn mu(&self) -> f64 {
        self.l / self.horizon as f64
    }

    pub fn a_diagonal(&self) -> Vector {
        let mut a = Vector::from_element(self.d, self.l);
        a[self.d - 1] = self.mu();
        a
    }

    pub fn a_matrix(&self) -> SpdMatrix {
        SpdMatrix::from_diagonal(&self.a_diagonal()).expect("positive diagonal")
    }

    pub fn regularizer(&self) -> Regularizer {
        Regularizer::QuadraticL2 { weight: QuadraticWeight::Matrix(self.a_matrix()), center: None }
    }

    /// Gradient oracle `ξ_n ~ N(0, σ²L I)`.
    pub fn oracle(&self, seed: u64) -> LinearNoiseOracle {
        LinearNoiseOracle {
            slope: Vector::zeros(self.d),
            noise_factor: Matrix::identity(self.d, self.d) * (self.sigma * self.sigma * self.l).sqrt(),
            rng: RngStream::new(seed),
        }
    }

    /// `(σ²/12) min{(Lγ)², 1}`.
    pub fn floor(&self) -> f64 {
        self.sigma * self.sigma / 12.0 * (self.l * self.gamma).powi(2).min(1.0)
    }

    /// `(σ²L/12) min{nμγ², 1/(μn)}`.
    pub fn chain_floor(&self, n: u64) -> f64 {
        let (n, mu) = (n as f64, self.mu());
        self.sigma * self.sigma * self.l / 12.0 * (n * mu * self.gamma * self.gamma).min(1.0 / (mu * n))
    }
}

/// Exact `E⟨θ̄_n, Aθ̄_n⟩` for SDA started at 0 on `inst`:
/// `(γ²σ²L/n²) Σ_j [(d-1)L S_L(j)² + μ S_μ(j)²]` with suffix sums
/// `S_a(j) = Σ_{k=j}^{m} 1/(1 + γak)`, where `m = n` for the shifted window
/// and `m = n - 1` for the standard one.
pub fn lower_bound_exact(inst: &LowerBoundInstance, n: u64, window: AveragingWindow) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let m = match window {
        AveragingWindow::Shifted => n,
        AveragingWindow::Standard => n - 1,
    };
    let (l, mu, g) = (inst.l, inst.mu(), inst.gamma);
    let (mut s_l, mut s_mu, mut total) = (0.0, 0.0, 0.0);
    for k in (1..=m).rev() {
        s_l += 1.0 / (1.0 + g * l * k as f64);
        s_mu += 1.0 / (1.0 + g * mu * k as f64);
        total += (inst.d - 1) as f64 * l * s_l * s_l + mu * s_mu * s_mu;
    }
    let nf = n as f64;
    Ok(g * g * inst.sigma * inst.sigma * l / (nf * nf) * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_term() {
        let inst = LowerBoundInstance::new(2, 1.0, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(lower_bound_exact(&inst, 1, AveragingWindow::Shifted).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(lower_bound_exact(&inst, 1, AveragingWindow::Standard).unwrap(), 0.0);
    }

    #[test]
    fn matches_matrix_double_sum() {
        // Direct O(n²) evaluation of (γ²σ²L/n²) Σ_j tr(M_j A M_j).
        let inst = LowerBoundInstance::new(3, 2.0, 0.3, 0.7, 20).unwrap();
        let a = inst.a_diagonal();
        for n in [1u64, 5, 20] {
            let mut total = 0.0;
            for j in 1..=n {
                for i in 0..3 {
                    let s: f64 = (j..=n).map(|k| 1.0 / (1.0 + inst.gamma * a[i] * k as f64)).sum();
                    total += a[i] * s * s;
                }
            }
            let expected = inst.gamma.powi(2) * inst.sigma.powi(2) * inst.l / (n * n) as f64 * total;
            let got = lower_bound_exact(&inst, n, AveragingWindow::Shifted).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn floors_hold_on_grid() {
        for gamma in [0.01, 0.1, 1.0] {
            for big_n in [10u64, 100, 1000] {
                let inst = LowerBoundInstance::new(2, 1.0, gamma, 1.0, big_n).unwrap();
                let exact = lower_bound_exact(&inst, big_n, AveragingWindow::Shifted).unwrap();
                assert!(exact >= inst.floor(), "γ={gamma} N={big_n}");
                assert!(exact >= inst.chain_floor(big_n));
            }
        }
    }

    #[test]
    fn validation() {
        assert!(LowerBoundInstance::new(1, 1.0, 1.0, 1.0, 1).is_err());
        assert!(LowerBoundInstance::new(2, 1.0, 0.0, 1.0, 1).is_err());
        assert!(LowerBoundInstance::new(2, 1.0, 1.0, 1.0, 0).is_err());
    }
}
