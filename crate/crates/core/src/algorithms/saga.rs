use super::{Algorithm, Averager, Composite, Recorder, RunOptions, RunTrace, StepSchedule};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::numerics::{check_dim, RngStream, Vector};
use crate::problems::Dataset;
use crate::regularizer::Regularizer;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SagaConfig {
    pub seed: u64,
    /// Largest dataset accepted for the gradient table.
    pub table_cap: usize,
}

impl Default for SagaConfig {
    fn default() -> Self {
        Self { seed: 0, table_cap: 1 << 24 }
    }
}

/// `1/(3 max_i ‖x_i‖²)`.
pub fn saga_default_step(data: &Dataset) -> Result<f64> {
    let l = data.rows().iter().map(|x| x.norm_squared()).fold(0.0, f64::max);
    if l <= 0.0 {
        return Err(Error::InvalidParameter("all samples are zero".into()));
    }
    Ok(1.0 / (3.0 * l))
}

/// Gradient table for `f = (1/2n) Σ (⟨x_i, θ⟩ - y_i)²`. Each stored gradient
/// is `r_i x_i`, so only the residuals `r_i` are kept.
#[derive(Clone, Debug)]
pub struct SagaState<'a> {
    data: &'a Dataset,
    residuals: Vec<f64>,
    mean: Vector,
    steps_since_refresh: usize,
}

impl<'a> SagaState<'a> {
    pub fn new(data: &'a Dataset, theta: &Vector, cap: usize) -> Result<Self> {
        if data.len() > cap {
            return Err(Error::InvalidParameter(format!(
                "dataset of {} rows exceeds the gradient-table cap {cap}",
                data.len()
            )));
        }
        check_dim(data.dim(), theta.len())?;
        let residuals = data.rows().iter().zip(data.labels()).map(|(x, y)| x.dot(theta) - y).collect();
        let mut s = Self { data, residuals, mean: Vector::zeros(data.dim()), steps_since_refresh: 0 };
        s.refresh_mean();
        Ok(s)
    }

    fn refresh_mean(&mut self) {
        let n = self.residuals.len() as f64;
        let mut m = Vector::zeros(self.data.dim());
        for (x, r) in self.data.rows().iter().zip(&self.residuals) {
            m.axpy(r / n, x, 1.0);
        }
        self.mean = m;
        self.steps_since_refresh = 0;
    }

    /// Stored mean gradient.
    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// Mean recomputed from the stored gradients.
    pub fn recomputed_mean(&self) -> Vector {
        let n = self.residuals.len() as f64;
        self.data
            .rows()
            .iter()
            .zip(&self.residuals)
            .fold(Vector::zeros(self.data.dim()), |acc, (x, r)| acc + x * (r / n))
    }

    /// Variance-reduced estimate at `θ` for sample `j`; updates the table.
    pub fn estimate(&mut self, j: usize, theta: &Vector) -> Vector {
        let x = &self.data.rows()[j];
        let r_new = x.dot(theta) - self.data.labels()[j];
        let delta = r_new - self.residuals[j];
        let est = x * delta + &self.mean;
        self.residuals[j] = r_new;
        self.mean.axpy(delta / self.residuals.len() as f64, x, 1.0);
        self.steps_since_refresh += 1;
        // Periodic exact refresh keeps the running mean from drifting.
        if self.steps_since_refresh >= self.residuals.len().max(64) {
            self.refresh_mean();
        }
        est
    }
}

/// Proximal SAGA on the least-squares finite sum of `data`.
pub fn run_saga(g: &Regularizer, data: &Dataset, opts: &RunOptions, config: SagaConfig) -> Result<RunTrace> {
    let StepSchedule::Constant(gamma) = opts.schedule else {
        return Err(Error::InvalidParameter("SAGA requires a constant step-size".into()));
    };
    let comp = Composite::new(Geometry::Euclidean, g.clone())?;
    let theta0 = opts.prepare(&comp, data.dim())?;
    let mut state = SagaState::new(data, &theta0, config.table_cap)?;
    let mut rng = RngStream::new(config.seed);
    let mut theta = theta0.clone();
    let mut averager = Averager::new(data.dim());
    averager.push(&theta);
    let mut rec = Recorder::new(&opts.grid, opts.n_iters);
    for n in 1..=opts.n_iters {
        let j = rng.index(data.len());
        let est = state.estimate(j, &theta);
        theta = comp.mirror_step(&theta, &est, gamma)?;
        if rec.due(n) {
            rec.record(n, &theta, &averager, None)?;
        }
        averager.push(&theta);
    }
    Ok(RunTrace {
        algorithm: Algorithm::Saga,
        schedule: opts.schedule,
        seed: Some(config.seed),
        theta0,
        checkpoints: rec.checkpoints,
    })
}
