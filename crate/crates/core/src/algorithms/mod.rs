//! Optimizer recursions: dual averaging (deterministic and stochastic),
//! mirror descent, averaged proximal SGD and SAGA.

mod saga;

pub use saga::{run_saga, saga_default_step, SagaConfig, SagaState};

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geometry::{h_grad, max_stepsize, max_stepsize_on_simplex, Geometry, ENTROPY_OVERFLOW_GUARD};
use crate::numerics::{check_dim, CompensatedSum, SpdMatrix, Vector};
use crate::problems::{ExactGradient, GradientOracle, QuadraticProblem};
use crate::regularizer::{check_supported, composite_map, scaled_softmax, Regularizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Da,
    Sda,
    Md,
    Sgd,
    Saga,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Da => "da",
            Algorithm::Sda => "sda",
            Algorithm::Md => "md",
            Algorithm::Sgd => "sgd",
            Algorithm::Saga => "saga",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "da" => Ok(Algorithm::Da),
            "sda" => Ok(Algorithm::Sda),
            "md" => Ok(Algorithm::Md),
            "sgd" => Ok(Algorithm::Sgd),
            "saga" => Ok(Algorithm::Saga),
            other => Err(Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Step-size rule `γ_n`, `n ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `γ_n = C/√n`.
    Decaying(f64),
}

impl StepSchedule {
    pub fn constant(gamma: f64) -> Result<Self> {
        positive_step(gamma).map(StepSchedule::Constant)
    }

    pub fn decaying(c: f64) -> Result<Self> {
        positive_step(c).map(StepSchedule::Decaying)
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Constant(_) => "constant",
            StepSchedule::Decaying(_) => "decaying",
        }
    }

    pub fn gamma(&self, n: u64) -> f64 {
        match *self {
            StepSchedule::Constant(g) => g,
            StepSchedule::Decaying(c) => c / (n.max(1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant(g) | StepSchedule::Decaying(g) => positive_step(g).map(|_| ()),
        }
    }
}

fn positive_step(g: f64) -> Result<f64> {
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(Error::InvalidParameter(format!("step-size must be positive, got {g}")))
    }
}

/// Yields `(γ_n, τ_n)` with `τ_n = Σ_{k≤n} γ_k`; constant steps use `nγ`
/// directly so that `τ_n` carries no accumulated rounding.
struct StepCursor {
    schedule: StepSchedule,
    n: u64,
    tau: f64,
}

impl StepCursor {
    fn new(schedule: StepSchedule) -> Self {
        Self { schedule, n: 0, tau: 0.0 }
    }

    fn advance(&mut self) -> (f64, f64) {
        self.n += 1;
        let g = self.schedule.gamma(self.n);
        self.tau = match self.schedule {
            StepSchedule::Constant(c) => self.n as f64 * c,
            StepSchedule::Decaying(_) => self.tau + g,
        };
        (g, self.tau)
    }
}

/// Iterations at which a trace records a checkpoint.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum CheckpointGrid {
    /// `{1, 2, 4, …} ∪ {n_iters}`.
    #[default]
    Geometric,
    /// Every `k`-th iteration and `n_iters`.
    Every(u64),
    /// Listed iterations that do not exceed `n_iters`.
    Explicit(Vec<u64>),
}

impl CheckpointGrid {
    pub fn points(&self, n_iters: u64) -> Vec<u64> {
        let mut pts: Vec<u64> = match self {
            CheckpointGrid::Geometric => std::iter::successors(Some(1u64), |&n| n.checked_mul(2))
                .take_while(|&n| n <= n_iters)
                .chain(std::iter::once(n_iters))
                .collect(),
            CheckpointGrid::Every(k) => (1..=n_iters)
                .filter(|n| n % k.max(&1) == 0)
                .chain(std::iter::once(n_iters))
                .collect(),
            CheckpointGrid::Explicit(v) => v.iter().copied().filter(|&n| n >= 1 && n <= n_iters).collect(),
        };
        pts.retain(|&n| n >= 1);
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

/// Running mean `θ̄_n = (1/n) Σ_{k<n} θ_k` over a compensated sum.
#[derive(Clone, Debug)]
pub struct Averager {
    sum: CompensatedSum,
    count: u64,
}

impl Averager {
    pub fn new(d: usize) -> Self {
        Self { sum: CompensatedSum::zeros(d), count: 0 }
    }

    pub fn push(&mut self, theta: &Vector) {
        self.sum.add(theta);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Result<Vector> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("average of zero iterates".into()));
        }
        Ok(self.sum.value() / self.count as f64)
    }
}

/// Mutable state of a run after `n` iterations.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub n: u64,
    pub eta: Vector,
    pub theta: Vector,
    pub averager: Averager,
}

/// `θ̄_n` of the iterates `θ_0, …, θ_{n-1}` folded into `state`.
pub fn average(state: &OptimizerState) -> Result<Vector> {
    state.averager.mean()
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub n: u64,
    /// `θ_n`.
    pub theta: Vector,
    /// `θ̄_n = (1/n) Σ_{k<n} θ_k`.
    pub theta_avg: Vector,
    /// Dual iterate `η_n` for dual-averaging runs.
    pub eta: Option<Vector>,
    pub elapsed: Duration,
}

impl Checkpoint {
    /// FNV-1a over the bit patterns of `θ_n`.
    pub fn theta_hash(&self) -> u64 {
        self.theta.iter().flat_map(|x| x.to_bits().to_le_bytes()).fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        })
    }
}

/// Equality ignores wall-clock time.
impl PartialEq for Checkpoint {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.theta == other.theta && self.theta_avg == other.theta_avg && self.eta == other.eta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub seed: Option<u64>,
    pub theta0: Vector,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

/// A validated `(geometry, regularizer)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Composite {
    geom: Geometry,
    g: Regularizer,
}

impl Composite {
    pub fn new(geom: Geometry, g: Regularizer) -> Result<Self> {
        check_supported(&geom, &g)?;
        Ok(Self { geom, g })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.g
    }

    /// Largest certified constant step for `f` with Hessian `Σ`.
    pub fn max_stepsize(&self, sigma: &SpdMatrix) -> f64 {
        match self.g {
            Regularizer::IndicatorSimplex { radius } => max_stepsize_on_simplex(&self.geom, sigma, radius),
            _ => max_stepsize(&self.geom, sigma),
        }
    }

    /// `0` mapped into the domain for Euclidean and `ℓp`; the uniform point
    /// of the simplex (radius 1 without a constraint) for entropy.
    pub fn default_theta0(&self, d: usize) -> Vector {
        match (&self.geom, &self.g) {
            (Geometry::NegativeEntropy, Regularizer::IndicatorSimplex { radius }) => {
                Vector::from_element(d, radius / d as f64)
            }
            (Geometry::NegativeEntropy, _) => Vector::from_element(d, 1.0 / d as f64),
            (Geometry::Euclidean, _) => {
                composite_map(&self.geom, &self.g, &Vector::zeros(d), 0.0).expect("zero is a finite dual point")
            }
            (Geometry::SquaredLpNorm { .. }, _) => Vector::zeros(d),
        }
    }

    /// `θ_n = argmin { -⟨η, θ⟩ + h(θ) + τ g(θ) }`.
    pub fn primal(&self, eta: &Vector, tau: f64) -> Result<Vector> {
        composite_map(&self.geom, &self.g, eta, tau)
    }

    /// One mirror step `argmin { γ⟨ĝ, θ⟩ + γ g(θ) + D_h(θ, θ_prev) }`.
    pub fn mirror_step(&self, theta: &Vector, grad: &Vector, gamma: f64) -> Result<Vector> {
        match (&self.geom, &self.g) {
            (Geometry::NegativeEntropy, Regularizer::IndicatorSimplex { radius }) => {
                Ok(scaled_softmax(&log_step(theta, grad, gamma), *radius))
            }
            (Geometry::NegativeEntropy, _) => {
                let w = log_step(theta, grad, gamma);
                let m = w.max();
                if m > ENTROPY_OVERFLOW_GUARD {
                    return Err(Error::Overflow(m));
                }
                Ok(w.map(f64::exp))
            }
            (Geometry::Euclidean, _) => {
                let mut eta = theta.clone();
                eta.axpy(-gamma, grad, 1.0);
                self.primal(&eta, gamma)
            }
            (Geometry::SquaredLpNorm { .. }, _) => {
                let mut eta = h_grad(&self.geom, theta)?;
                eta.axpy(-gamma, grad, 1.0);
                self.primal(&eta, gamma)
            }
        }
    }
}

/// `ln θ - γ ĝ`, with `ln 0 = -∞` kept so zero weights stay at zero.
fn log_step(theta: &Vector, grad: &Vector, gamma: f64) -> Vector {
    Vector::from_fn(theta.len(), |i, _| theta[i].ln() - gamma * grad[i])
}

/// Shared run parameters.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub schedule: StepSchedule,
    pub n_iters: u64,
    pub theta0: Option<Vector>,
    pub grid: CheckpointGrid,
    /// Certified maximum step; exceeding it logs a warning.
    pub max_step: Option<f64>,
}

impl RunOptions {
    pub fn new(schedule: StepSchedule, n_iters: u64) -> Self {
        Self { schedule, n_iters, theta0: None, grid: CheckpointGrid::Geometric, max_step: None }
    }

    pub fn theta0(mut self, theta0: Vector) -> Self {
        self.theta0 = Some(theta0);
        self
    }

    pub fn grid(mut self, grid: CheckpointGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn max_step(mut self, max_step: f64) -> Self {
        self.max_step = Some(max_step);
        self
    }

    fn prepare(&self, comp: &Composite, d: usize) -> Result<Vector> {
        self.schedule.validate()?;
        if let Some(max) = self.max_step {
            let g1 = self.schedule.gamma(1);
            if g1 > max * (1.0 + 1e-12) {
                log::warn!("step-size {g1:e} exceeds the certified maximum {max:e}; proceeding");
            }
        }
        let theta0 = self.theta0.clone().unwrap_or_else(|| comp.default_theta0(d));
        check_dim(d, theta0.len())?;
        if !comp.geom.in_interior(&theta0) {
            return Err(Error::Domain(comp.geom.name()));
        }
        Ok(theta0)
    }
}

/// Records checkpoints while a loop runs.
struct Recorder {
    points: std::vec::IntoIter<u64>,
    next: Option<u64>,
    start: Instant,
    checkpoints: Vec<Checkpoint>,
}

impl Recorder {
    fn new(grid: &CheckpointGrid, n_iters: u64) -> Self {
        let mut points = grid.points(n_iters).into_iter();
        let next = points.next();
        Self { points, next, start: Instant::now(), checkpoints: Vec::new() }
    }

    fn due(&self, n: u64) -> bool {
        self.next == Some(n)
    }

    fn record(&mut self, n: u64, theta: &Vector, avg: &Averager, eta: Option<&Vector>) -> Result<()> {
        self.checkpoints.push(Checkpoint {
            n,
            theta: theta.clone(),
            theta_avg: avg.mean()?,
            eta: eta.cloned(),
            elapsed: self.start.elapsed(),
        });
        self.next = self.points.next();
        Ok(())
    }
}

fn dual_averaging<O: GradientOracle>(
    algorithm: Algorithm,
    comp: &Composite,
    oracle: &mut O,
    opts: &RunOptions,
) -> Result<RunTrace> {
    let d = oracle.dim();
    let theta0 = opts.prepare(comp, d)?;
    let mut state = OptimizerState {
        n: 0,
        eta: h_grad(&comp.geom, &theta0)?,
        theta: theta0.clone(),
        averager: Averager::new(d),
    };
    state.averager.push(&state.theta);
    let mut steps = StepCursor::new(opts.schedule);
    let mut rec = Recorder::new(&opts.grid, opts.n_iters);
    while state.n < opts.n_iters {
        let grad = oracle.gradient(&state.theta)?;
        let (gamma, tau) = steps.advance();
        state.eta.axpy(-gamma, &grad, 1.0);
        state.theta = comp.primal(&state.eta, tau)?;
        state.n += 1;
        if rec.due(state.n) {
            rec.record(state.n, &state.theta, &state.averager, Some(&state.eta))?;
        }
        state.averager.push(&state.theta);
    }
    Ok(RunTrace { algorithm, schedule: opts.schedule, seed: oracle.seed(), theta0, checkpoints: rec.checkpoints })
}

fn mirror_descent<O: GradientOracle>(
    algorithm: Algorithm,
    comp: &Composite,
    oracle: &mut O,
    opts: &RunOptions,
) -> Result<RunTrace> {
    let d = oracle.dim();
    let theta0 = opts.prepare(comp, d)?;
    let mut theta = theta0.clone();
    let mut averager = Averager::new(d);
    averager.push(&theta);
    let mut steps = StepCursor::new(opts.schedule);
    let mut rec = Recorder::new(&opts.grid, opts.n_iters);
    for n in 1..=opts.n_iters {
        let grad = oracle.gradient(&theta)?;
        let (gamma, _) = steps.advance();
        theta = comp.mirror_step(&theta, &grad, gamma)?;
        if rec.due(n) {
            rec.record(n, &theta, &averager, None)?;
        }
        averager.push(&theta);
    }
    Ok(RunTrace { algorithm, schedule: opts.schedule, seed: oracle.seed(), theta0, checkpoints: rec.checkpoints })
}

/// Deterministic dual averaging on the exact gradient of `p`.
pub fn run_da(comp: &Composite, p: &QuadraticProblem, opts: &RunOptions) -> Result<RunTrace> {
    let mut opts = opts.clone();
    opts.max_step.get_or_insert_with(|| comp.max_stepsize(p.sigma()));
    dual_averaging(Algorithm::Da, comp, &mut ExactGradient(p), &opts)
}

/// Deterministic dual averaging driven by an exact oracle other than a
/// quadratic problem (for instance `f = 0`).
pub fn run_da_with<O: GradientOracle>(comp: &Composite, oracle: &mut O, opts: &RunOptions) -> Result<RunTrace> {
    dual_averaging(Algorithm::Da, comp, oracle, opts)
}

/// Stochastic dual averaging; decaying schedules weight `g` by `Σ_{k≤n} γ_k`.
pub fn run_sda<O: GradientOracle>(comp: &Composite, oracle: &mut O, opts: &RunOptions) -> Result<RunTrace> {
    dual_averaging(Algorithm::Sda, comp, oracle, opts)
}

/// Composite mirror descent with the given oracle.
pub fn run_md<O: GradientOracle>(comp: &Composite, oracle: &mut O, opts: &RunOptions) -> Result<RunTrace> {
    mirror_descent(Algorithm::Md, comp, oracle, opts)
}

/// Averaged proximal SGD, i.e. Euclidean mirror descent.
pub fn run_sgd<O: GradientOracle>(g: &Regularizer, oracle: &mut O, opts: &RunOptions) -> Result<RunTrace> {
    let comp = Composite::new(Geometry::Euclidean, g.clone())?;
    mirror_descent(Algorithm::Sgd, &comp, oracle, opts)
}

#[cfg(test)]
mod tests;
