//! Bound evaluators, exact oracles and convergence metrics.

mod bounds;
mod lower_bound;
mod metrics;

pub use bounds::*;
pub use lower_bound::{lower_bound_exact, AveragingWindow, LowerBoundInstance};
pub use metrics::{metrics, normalize, slope_estimate, CheckpointMetrics, Metric};

use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Iterates of mirror descent and dual averaging with `f = 0` and
/// `g = (ν/2)‖θ - θ_*‖²` in the Euclidean geometry after `n` steps:
/// `θ_n^md - θ_* = (θ_0 - θ_*)/(1 + γν)^n` and
/// `θ_n^da - θ_* = (θ_0 - θ_*)/(1 + nγν)`.
pub fn closed_form_md_da(nu: f64, gamma: f64, theta0: &Vector, theta_star: &Vector, n: u64) -> Result<(Vector, Vector)> {
    if !(nu > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("need ν, γ > 0, got ν={nu}, γ={gamma}")));
    }
    if theta0.len() != theta_star.len() {
        return Err(Error::DimensionMismatch { expected: theta_star.len(), got: theta0.len() });
    }
    let offset = theta0 - theta_star;
    let s = gamma * nu;
    let md = theta_star + &offset / (1.0 + s).powf(n as f64);
    let da = theta_star + offset / (1.0 + n as f64 * s);
    Ok((md, da))
}
