use std::fmt;
use std::str::FromStr;

use crate::algorithms::RunTrace;
use crate::error::{Error, Result};
use crate::numerics::{check_dim, Vector};
use crate::problems::{OptimumCertificate, QuadraticProblem};
use crate::regularizer::Regularizer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// `ψ(θ̄_n) - ψ(θ_*)`.
    PsiGapAvg,
    /// `ψ(θ_n) - ψ(θ_*)`.
    PsiGapLast,
    /// `½‖θ̄_n - θ_*‖²_Σ`.
    MahalanobisAvg,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::MahalanobisAvg, Metric::PsiGapAvg, Metric::PsiGapLast];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PsiGapAvg => "psi_gap_avg",
            Metric::PsiGapLast => "psi_gap_last",
            Metric::MahalanobisAvg => "mahalanobis_avg",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointMetrics {
    pub n: u64,
    pub psi_gap_avg: f64,
    pub psi_gap_last: f64,
    pub mahalanobis_avg: f64,
}

impl CheckpointMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::PsiGapAvg => self.psi_gap_avg,
            Metric::PsiGapLast => self.psi_gap_last,
            Metric::MahalanobisAvg => self.mahalanobis_avg,
        }
    }

    /// Values at a single point `θ` (used for `n = 0`).
    pub fn at_point(p: &QuadraticProblem, g: &Regularizer, cert: &OptimumCertificate, theta: &Vector) -> Result<Self> {
        check_dim(cert.theta.len(), theta.len())?;
        let gap = p.psi_gap(g, theta, &cert.theta)?;
        Ok(Self {
            n: 0,
            psi_gap_avg: gap,
            psi_gap_last: gap,
            mahalanobis_avg: 0.5 * p.mahalanobis_sq(&(theta - &cert.theta))?,
        })
    }
}

/// Per-checkpoint metrics of `trace` against `cert`.
pub fn metrics(
    trace: &RunTrace,
    p: &QuadraticProblem,
    g: &Regularizer,
    cert: &OptimumCertificate,
) -> Result<Vec<CheckpointMetrics>> {
    trace
        .checkpoints
        .iter()
        .map(|c| {
            check_dim(cert.theta.len(), c.theta.len())?;
            Ok(CheckpointMetrics {
                n: c.n,
                psi_gap_avg: p.psi_gap(g, &c.theta_avg, &cert.theta)?,
                psi_gap_last: p.psi_gap(g, &c.theta, &cert.theta)?,
                mahalanobis_avg: 0.5 * p.mahalanobis_sq(&(&c.theta_avg - &cert.theta))?,
            })
        })
        .collect()
}

/// Divides each metric by its value at `base` (typically `θ_0`); metrics
/// whose base value is zero are left unscaled.
pub fn normalize(values: &[CheckpointMetrics], base: &CheckpointMetrics) -> Vec<CheckpointMetrics> {
    let scale = |x: f64, b: f64| if b > 0.0 && b.is_finite() { x / b } else { x };
    values
        .iter()
        .map(|m| CheckpointMetrics {
            n: m.n,
            psi_gap_avg: scale(m.psi_gap_avg, base.psi_gap_avg),
            psi_gap_last: scale(m.psi_gap_last, base.psi_gap_last),
            mahalanobis_avg: scale(m.mahalanobis_avg, base.mahalanobis_avg),
        })
        .collect()
}

/// Least-squares slope of `log y` against `log n` over points with
/// `lo ≤ n ≤ hi`.
pub fn slope_estimate(points: &[(u64, f64)], window: (u64, u64)) -> Result<f64> {
    let (lo, hi) = window;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, _)| *n >= lo && *n <= hi)
        .map(|&(n, y)| ((n as f64).ln(), y.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::InvalidParameter(format!("slope window holds {} points, need 3", logs.len())));
    }
    if logs.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::InvalidParameter("slope window contains non-positive values".into()));
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate slope window".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_sda, CheckpointGrid, Composite, RunOptions, StepSchedule};
    use crate::geometry::Geometry;
    use crate::problems::{compute_optimum, generate_synthetic, SyntheticSpec, DEFAULT_OPTIMUM_TOL};
    use approx::assert_relative_eq;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(u64, f64)> {
        (0..12).map(|k| 1u64 << k).map(|n| (n, f(n as f64))).collect()
    }

    #[test]
    fn slope_examples() {
        assert_relative_eq!(slope_estimate(&series(|n| 3.0 / n), (1, 4096)).unwrap(), -1.0, epsilon = 1e-10);
        assert_relative_eq!(slope_estimate(&series(|n| 1.0 / n.sqrt()), (1, 4096)).unwrap(), -0.5, epsilon = 1e-10);
        assert_relative_eq!(slope_estimate(&series(|_| 2.0), (1, 4096)).unwrap(), 0.0, epsilon = 1e-12);
        assert!(slope_estimate(&series(|n| n), (1, 2)).is_err());
        assert!(slope_estimate(&series(|_| 0.0), (1, 4096)).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
    }

    #[test]
    fn metrics_on_simplex_run() {
        let (p, mut s) = generate_synthetic(SyntheticSpec::new(6, 1), 2).unwrap();
        let g = Regularizer::simplex(p.theta_sigma().lp_norm(1) / 2.0).unwrap();
        let comp = Composite::new(Geometry::Euclidean, g.clone()).unwrap();
        let cert = compute_optimum(&p, &g, &Geometry::Euclidean, DEFAULT_OPTIMUM_TOL).unwrap();
        let gamma = 1.0 / (2.0 * p.sigma().trace());
        let opts = RunOptions::new(StepSchedule::Constant(gamma), 4000).grid(CheckpointGrid::Geometric);
        let t = run_sda(&comp, &mut s, &opts).unwrap();
        let ms = metrics(&t, &p, &g, &cert).unwrap();
        for m in &ms {
            assert!(m.mahalanobis_avg <= m.psi_gap_avg + 1e-8);
        }
        let base = CheckpointMetrics::at_point(&p, &g, &cert, &t.theta0).unwrap();
        let norm = normalize(&ms, &base);
        // θ̄_1 = θ_0.
        assert_relative_eq!(norm[0].psi_gap_avg, 1.0, epsilon = 1e-12);
        assert_relative_eq!(norm[0].mahalanobis_avg, 1.0, epsilon = 1e-12);

        let at_opt = CheckpointMetrics::at_point(&p, &g, &cert, &cert.theta).unwrap();
        assert_eq!((at_opt.psi_gap_avg, at_opt.mahalanobis_avg), (0.0, 0.0));
    }
}
