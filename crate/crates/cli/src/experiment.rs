//! Experiment orchestration: problem setup, seeded replications, scoring and
//! output files.

use std::path::Path;

use dualavg::analysis::{
    bound_prop2, constrained_conversion_bound, dual_distance_sq, lower_bound_exact, metrics, AveragingWindow,
    BoundInputs, CheckpointMetrics, LowerBoundInstance, Metric,
};
use dualavg::geometry::{bregman, q_moment, spectral_q_moment};
use dualavg::problems::{DEFAULT_OPTIMUM_TOL, Dataset};
use dualavg::regularizer::g_eval;
use dualavg::{
    compute_optimum, generate_synthetic, integrate_da_flow, integrate_md_flow, load_libsvm, run_da, run_md, run_saga,
    run_sda, run_sgd, AdditiveNoiseOracle, Algorithm, CheckpointGrid, Composite, FlowSpec, FlowTrace, Geometry,
    OptimumCertificate, QuadraticProblem, Regularizer, RunOptions, RunTrace, SagaConfig, SpdMatrix,
    StepSchedule, SyntheticSpec, Vector,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, RegularizerChoice, ScheduleKind};
use crate::error::{io_err, HarnessError, Result};
use crate::plot::emit_plot;
use crate::table::{emit_csv, ResultTable, RowContext};

/// Slack of the `½‖θ̄ - θ_*‖²_Σ ≤ ψ(θ̄) - ψ(θ_*)` check.
pub const NORMLOWER_TOL: f64 = 1e-8;
/// Checkpoints per decade of the logarithmic grid.
pub const GRID_PER_DECADE: u32 = 10;
/// Outlier cutoff as a multiple of the mean row norm.
pub const OUTLIER_FACTOR: f64 = 5.0;

/// Seed of replication `rep`.
pub fn replication_seed(base: u64, rep: usize) -> u64 {
    base ^ rep as u64
}

/// `BENCH_THREADS`, then the configured count, then the available parallelism.
pub fn worker_count(cfg: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var("BENCH_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(HarnessError::Config(format!("BENCH_THREADS must be a positive integer, got {v:?}"))),
        };
    }
    Ok(cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// `{round(10^{k/per_decade})} ∪ {n_iters}` up to `n_iters`.
pub fn log_grid(n_iters: u64, per_decade: u32) -> Vec<u64> {
    let mut pts: Vec<u64> = (0..)
        .map(|k| 10f64.powf(k as f64 / per_decade as f64).round() as u64)
        .take_while(|&n| n <= n_iters)
        .chain(std::iter::once(n_iters))
        .collect();
    pts.dedup();
    pts
}

/// Counts of invariant checks and their failures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantReport {
    pub checkpoints: usize,
    pub normlower_violations: usize,
    pub conversion_checked: usize,
    pub conversion_violations: usize,
    /// Largest `½‖θ̄ - θ_*‖²_Σ - (ψ(θ̄) - ψ(θ_*))` seen.
    pub worst_normlower_excess: f64,
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self {
            checkpoints: 0,
            normlower_violations: 0,
            conversion_checked: 0,
            conversion_violations: 0,
            worst_normlower_excess: f64::NEG_INFINITY,
        }
    }
}

impl InvariantReport {
    pub fn merge(&mut self, o: &InvariantReport) {
        self.checkpoints += o.checkpoints;
        self.normlower_violations += o.normlower_violations;
        self.conversion_checked += o.conversion_checked;
        self.conversion_violations += o.conversion_violations;
        self.worst_normlower_excess = self.worst_normlower_excess.max(o.worst_normlower_excess);
    }

    pub fn is_clean(&self) -> bool {
        self.normlower_violations == 0 && self.conversion_violations == 0
    }

    /// Checks one point against the optimum. On simplex constraints the
    /// conversion `f(θ) - f(θ_*) ≤ ‖θ_* - θ_Σ‖_Σ‖θ - θ_*‖_Σ + ½‖θ - θ_*‖²_Σ`
    /// is checked as well.
    pub fn check_point(
        p: &QuadraticProblem,
        g: &Regularizer,
        theta_star: &Vector,
        theta: &Vector,
    ) -> dualavg::Result<Self> {
        let diff = theta - theta_star;
        let half_mahal = 0.5 * p.mahalanobis_sq(&diff)?;
        let gap = p.psi_gap(g, theta, theta_star)?;
        let excess = half_mahal - gap;
        let mut r = InvariantReport {
            checkpoints: 1,
            normlower_violations: usize::from(excess > NORMLOWER_TOL),
            worst_normlower_excess: excess,
            ..Default::default()
        };
        if let Regularizer::IndicatorSimplex { .. } = g {
            let misspec = p.mahalanobis_sq(&(theta_star - p.theta_sigma()))?.sqrt();
            let bound = constrained_conversion_bound(misspec, 2.0 * half_mahal);
            r.conversion_checked = 1;
            r.conversion_violations = usize::from(p.f_gap(theta, theta_star)? > bound + NORMLOWER_TOL);
        }
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub algorithm: String,
    pub schedule: String,
    pub replication: usize,
    pub seed: u64,
    pub n: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub table: ResultTable,
    /// Wall-clock per checkpoint; kept out of `results.csv`.
    pub timings: Vec<TimingRow>,
    /// Quantities computed from the config (radii, steps, optimum
    /// diagnostics), echoed as comments in `config.resolved`.
    pub derived: Vec<(String, String)>,
    pub invariants: InvariantReport,
}

fn ctx(cfg: &ExperimentConfig, regularizer: &str, geometry: &str) -> RowContext {
    RowContext {
        experiment: cfg.kind.name().into(),
        geometry: geometry.into(),
        regularizer: regularizer.into(),
        seed_base: cfg.seed,
    }
}

/// Runs `f(rep, seed)` for every replication on the worker pool; results
/// come back in replication order.
fn replicate<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> dualavg::Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(worker_count(cfg)?).build()?;
    pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, rep);
                f(rep, seed).map_err(|source| HarnessError::Replication { seed, source })
            })
            .collect()
    })
}

pub fn resolve_regularizer(choice: &RegularizerChoice, p: &QuadraticProblem) -> dualavg::Result<Regularizer> {
    match choice {
        RegularizerChoice::Fixed(g) => Ok(g.clone()),
        RegularizerChoice::AutoSimplex => Regularizer::simplex(p.theta_sigma().lp_norm(1) / 2.0),
    }
}

/// `R² = E‖x‖²_*` in the dual norm of the geometry over the spectral design
/// of `Σ`; the entropy value is scaled by the simplex radius.
pub fn radius_sq(geom: &Geometry, g: &Regularizer, sigma: &SpdMatrix) -> f64 {
    match geom {
        Geometry::Euclidean => sigma.trace(),
        Geometry::SquaredLpNorm { q, .. } => spectral_q_moment(*q, sigma),
        Geometry::NegativeEntropy => {
            let r = match g {
                Regularizer::IndicatorSimplex { radius } => *radius,
                _ => 1.0,
            };
            r * spectral_q_moment(f64::INFINITY, sigma)
        }
    }
}

fn schedule(kind: ScheduleKind, gamma: f64) -> dualavg::Result<StepSchedule> {
    match kind {
        ScheduleKind::Constant => StepSchedule::constant(gamma),
        ScheduleKind::Decaying => StepSchedule::decaying(gamma),
    }
}

/// One (algorithm, schedule) combination of an experiment.
#[derive(Clone, Debug)]
struct RunPlan {
    algorithm: Algorithm,
    schedule: StepSchedule,
    comp: Composite,
}

/// Per-replication scores of one run.
struct Scored {
    /// `n = 0` (the initial point) followed by the checkpoints.
    metrics: Vec<CheckpointMetrics>,
    elapsed: Vec<(u64, f64)>,
    invariants: InvariantReport,
}

fn score(
    trace: &RunTrace,
    p: &QuadraticProblem,
    g: &Regularizer,
    cert: &OptimumCertificate,
) -> dualavg::Result<Scored> {
    let mut ms = vec![CheckpointMetrics::at_point(p, g, cert, &trace.theta0)?];
    ms.extend(metrics(trace, p, g, cert)?);
    let mut inv = InvariantReport::default();
    for c in &trace.checkpoints {
        inv.merge(&InvariantReport::check_point(p, g, &cert.theta, &c.theta_avg)?);
    }
    let elapsed = trace.checkpoints.iter().map(|c| (c.n, c.elapsed.as_secs_f64())).collect();
    Ok(Scored { metrics: ms, elapsed, invariants: inv })
}

/// Folds replications into table rows, timings and the invariant report.
fn aggregate(
    cfg: &ExperimentConfig,
    ctx: &RowContext,
    plans: &[RunPlan],
    reps: &[Vec<Scored>],
    out: &mut Outcome,
) {
    for (i, plan) in plans.iter().enumerate() {
        let ns: Vec<u64> = reps[0][i].metrics.iter().map(|m| m.n).collect();
        for metric in Metric::ALL {
            let values: Vec<Vec<f64>> = (0..ns.len())
                .map(|k| reps.iter().map(|r| r[i].metrics[k].get(metric)).collect())
                .collect();
            out.table
                .push_series(ctx, plan.algorithm.name(), plan.schedule.name(), metric.name(), &ns, &values);
        }
        for (rep, r) in reps.iter().enumerate() {
            out.invariants.merge(&r[i].invariants);
            out.timings.extend(r[i].elapsed.iter().map(|&(n, seconds)| TimingRow {
                algorithm: plan.algorithm.name().into(),
                schedule: plan.schedule.name().into(),
                replication: rep,
                seed: replication_seed(cfg.seed, rep),
                n,
                seconds,
            }));
        }
    }
}

fn empty_outcome() -> Outcome {
    Outcome { table: ResultTable::default(), timings: Vec::new(), derived: Vec::new(), invariants: InvariantReport::default() }
}

fn certificate_notes(cert: &OptimumCertificate, out: &mut Outcome) {
    out.derived.push(("optimum_residual".into(), format!("{:e}", cert.residual)));
    out.derived.push(("optimum_iterations".into(), cert.iterations.to_string()));
    out.derived.push(("optimum_cross_check_gap".into(), format!("{:e}", cert.cross_check_gap)));
}

/// Step for `algorithm`: the configured value, or `1/(2R²)` with `R²` taken
/// in the geometry the algorithm runs in.
fn plan_runs(
    cfg: &ExperimentConfig,
    g: &Regularizer,
    r_sq: impl Fn(&Geometry) -> f64,
    saga_step: Option<f64>,
    out: &mut Outcome,
) -> Result<Vec<RunPlan>> {
    let mut plans = Vec::new();
    for &algorithm in &cfg.algorithms {
        let geom = match algorithm {
            Algorithm::Sgd | Algorithm::Saga => Geometry::Euclidean,
            _ => cfg.geometry,
        };
        let comp = Composite::new(geom, g.clone())?;
        let gamma = match (cfg.gamma, algorithm) {
            (Some(g), _) => g,
            (None, Algorithm::Saga) => saga_step.expect("saga runs on datasets"),
            (None, _) => 1.0 / (2.0 * r_sq(&geom)),
        };
        for &kind in &cfg.schedules {
            let schedule = schedule(kind, gamma)?;
            out.derived.push((format!("gamma_{}_{}", algorithm.name(), kind.name()), format!("{gamma:?}")));
            plans.push(RunPlan { algorithm, schedule, comp: comp.clone() });
        }
    }
    Ok(plans)
}

fn run_synthetic(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = empty_outcome();
    let (p, stream) = generate_synthetic(SyntheticSpec::new(cfg.d, cfg.seed), cfg.seed)?;
    let g = resolve_regularizer(&cfg.regularizer, &p)?;
    out.derived.push(("regularizer_resolved".into(), g.to_string()));
    let cert = compute_optimum(&p, &g, &cfg.geometry, DEFAULT_OPTIMUM_TOL)?;
    certificate_notes(&cert, &mut out);
    let plans = plan_runs(cfg, &g, |geom| radius_sq(geom, &g, p.sigma()), None, &mut out)?;
    let grid = CheckpointGrid::Explicit(log_grid(cfg.n_iters, GRID_PER_DECADE));

    let reps = replicate(cfg, |_, seed| {
        plans
            .iter()
            .map(|plan| {
                let opts = RunOptions::new(plan.schedule, cfg.n_iters)
                    .grid(grid.clone())
                    .max_step(plan.comp.max_stepsize(p.sigma()));
                let mut s = stream.reseeded(seed);
                let trace = match plan.algorithm {
                    Algorithm::Sda => run_sda(&plan.comp, &mut s, &opts)?,
                    Algorithm::Md => run_md(&plan.comp, &mut s, &opts)?,
                    Algorithm::Sgd => run_sgd(&g, &mut s, &opts)?,
                    Algorithm::Da => run_da(&plan.comp, &p, &opts)?,
                    Algorithm::Saga => unreachable!("rejected by config validation"),
                };
                score(&trace, &p, &g, &cert)
            })
            .collect()
    })?;
    aggregate(cfg, &ctx(cfg, &g.to_string(), &cfg.geometry.to_string()), &plans, &reps, &mut out);
    Ok(out)
}

fn load_dataset(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<(Dataset, Dataset)> {
    let path = cfg.data.as_ref().ok_or_else(|| HarnessError::Config("missing data path".into()))?;
    let raw = load_libsvm(path)?;
    let (clean, removed) = raw.remove_outliers(OUTLIER_FACTOR)?;
    let (train, test) = clean.split_half(cfg.seed)?;
    out.derived.push(("rows_loaded".into(), raw.len().to_string()));
    out.derived.push(("rows_removed_as_outliers".into(), removed.to_string()));
    out.derived.push(("rows_train".into(), train.len().to_string()));
    out.derived.push(("rows_test".into(), test.len().to_string()));
    Ok((train, test))
}

/// Ridge added to a singular empirical covariance, relative to its mean
/// eigenvalue.
const DATASET_RIDGE: f64 = 1e-6;

fn run_dataset(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = empty_outcome();
    let (train, _test) = load_dataset(cfg, &mut out)?;
    let p = train.to_problem(DATASET_RIDGE)?;
    let g = resolve_regularizer(&cfg.regularizer, &p)?;
    let cert = compute_optimum(&p, &g, &cfg.geometry, DEFAULT_OPTIMUM_TOL)?;
    certificate_notes(&cert, &mut out);
    let r_sq = |geom: &Geometry| {
        let q = match geom {
            Geometry::Euclidean => 2.0,
            Geometry::SquaredLpNorm { q, .. } => *q,
            Geometry::NegativeEntropy => f64::INFINITY,
        };
        q_moment(q, train.rows(), None)
    };
    let saga_step = dualavg::algorithms::saga_default_step(&train).ok();
    let plans = plan_runs(cfg, &g, r_sq, saga_step, &mut out)?;
    let grid = CheckpointGrid::Explicit(log_grid(cfg.n_iters, GRID_PER_DECADE));
    let reps = replicate(cfg, |_, seed| {
        plans
            .iter()
            .map(|plan| {
                let opts = RunOptions::new(plan.schedule, cfg.n_iters).grid(grid.clone());
                let mut s = train.stream(seed);
                let trace = match plan.algorithm {
                    Algorithm::Sda => run_sda(&plan.comp, &mut s, &opts)?,
                    Algorithm::Md => run_md(&plan.comp, &mut s, &opts)?,
                    Algorithm::Sgd => run_sgd(&g, &mut s, &opts)?,
                    Algorithm::Saga => run_saga(&g, &train, &opts, SagaConfig { seed, ..SagaConfig::default() })?,
                    Algorithm::Da => unreachable!("rejected by config validation"),
                };
                score(&trace, &p, &g, &cert)
            })
            .collect()
    })?;
    aggregate(cfg, &ctx(cfg, &g.to_string(), &cfg.geometry.to_string()), &plans, &reps, &mut out);
    Ok(out)
}

/// `E⟨θ̄_n, Aθ̄_n⟩` by Monte Carlo and in closed form, for both averaging
/// windows, plus the floor `(σ²/12) min{(Lγ)², 1}`.
fn run_lower_bound(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = empty_outcome();
    let gamma = cfg.gamma.unwrap_or(1.0);
    let inst = LowerBoundInstance::new(cfg.d, 1.0, gamma, 1.0, cfg.n_iters)?;
    let comp = Composite::new(Geometry::Euclidean, inst.regularizer())?;
    let a = inst.a_matrix();
    let ns = log_grid(cfg.n_iters, GRID_PER_DECADE);
    let opts = RunOptions::new(StepSchedule::constant(gamma)?, cfg.n_iters)
        .theta0(Vector::zeros(cfg.d))
        .grid(CheckpointGrid::Explicit(ns.clone()));
    let reps = replicate(cfg, |_, seed| {
        let trace = run_sda(&comp, &mut inst.oracle(seed), &opts)?;
        trace
            .checkpoints
            .iter()
            .map(|c| {
                let shifted = &c.theta_avg + (&c.theta - &trace.theta0) / c.n as f64;
                Ok((a.mul_vec(&shifted)?.dot(&shifted), a.mul_vec(&c.theta_avg)?.dot(&c.theta_avg)))
            })
            .collect::<dualavg::Result<Vec<(f64, f64)>>>()
    })?;
    let c = ctx(cfg, "lower-bound", "euclidean");
    let (algo, sched) = (Algorithm::Sda.name(), "constant");
    let mc = |pick: fn(&(f64, f64)) -> f64| -> Vec<Vec<f64>> {
        (0..ns.len()).map(|k| reps.iter().map(|r| pick(&r[k])).collect()).collect()
    };
    out.table.push_series(&c, algo, sched, "lb_monte_carlo", &ns, &mc(|v| v.0));
    out.table.push_series(&c, algo, sched, "lb_monte_carlo_standard", &ns, &mc(|v| v.1));
    let exact = |w| -> Result<Vec<Vec<f64>>> {
        ns.iter().map(|&n| Ok(vec![lower_bound_exact(&inst, n, w)?])).collect()
    };
    out.table.push_series(&c, algo, sched, "lb_exact", &ns, &exact(AveragingWindow::Shifted)?);
    out.table.push_series(&c, algo, sched, "lb_exact_standard", &ns, &exact(AveragingWindow::Standard)?);
    out.table.push_series(&c, algo, sched, "lb_floor", &ns, &vec![vec![inst.floor()]; ns.len()]);
    out.derived.push(("mu".into(), format!("{:?}", inst.mu())));
    Ok(out)
}

/// Additive-noise SDA against its upper bound
/// `2 min{D/(γn), dual/(γn)²} + (4/n) tr Σ^{-1}C` with `C = I`.
fn run_bound_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = empty_outcome();
    let (p, _) = generate_synthetic(SyntheticSpec::new(cfg.d, cfg.seed), cfg.seed)?;
    let g = resolve_regularizer(&cfg.regularizer, &p)?;
    let comp = Composite::new(cfg.geometry, g.clone())?;
    let cert = compute_optimum(&p, &g, &cfg.geometry, DEFAULT_OPTIMUM_TOL)?;
    certificate_notes(&cert, &mut out);
    let gamma = cfg.gamma.unwrap_or_else(|| comp.max_stepsize(p.sigma()));
    let schedule = StepSchedule::constant(gamma)?;
    out.derived.push(("gamma_sda_constant".into(), format!("{gamma:?}")));
    let theta0 = comp.default_theta0(cfg.d);
    let grid = log_grid(cfg.n_iters, GRID_PER_DECADE);
    let opts = RunOptions::new(schedule, cfg.n_iters).theta0(theta0.clone()).grid(CheckpointGrid::Explicit(grid));
    let noise = AdditiveNoiseOracle::isotropic(p.clone(), 1.0, 0);
    let reps = replicate(cfg, |_, seed| {
        let mut oracle = AdditiveNoiseOracle::isotropic(p.clone(), 1.0, seed);
        let trace = run_sda(&comp, &mut oracle, &opts)?;
        Ok(vec![score(&trace, &p, &g, &cert)?])
    })?;
    let plan = RunPlan { algorithm: Algorithm::Sda, schedule, comp: comp.clone() };
    let c = ctx(cfg, &g.to_string(), &cfg.geometry.to_string());
    aggregate(cfg, &c, std::slice::from_ref(&plan), &reps, &mut out);

    let mut inputs = BoundInputs::new(cert.bregman_from(&cfg.geometry, &theta0)?, gamma, 1);
    inputs.dual_distance_sq = dual_distance_sq(&cfg.geometry, p.sigma(), &theta0, &cert.theta);
    inputs.trace_sigma_inv_c = noise.trace_sigma_inv_c()?;
    let ns: Vec<u64> = reps[0][0].metrics.iter().map(|m| m.n).filter(|&n| n >= 1).collect();
    let bounds = ns
        .iter()
        .map(|&n| bound_prop2(&BoundInputs { n, ..inputs.clone() }).map(|b| vec![b]))
        .collect::<dualavg::Result<Vec<_>>>()?;
    out.table.push_series(&c, plan.algorithm.name(), schedule.name(), "bound_prop2", &ns, &bounds);
    Ok(out)
}

/// Mirror-descent and dual-averaging flows on a synthetic quadratic.
fn run_ode(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = empty_outcome();
    let (p, _) = generate_synthetic(SyntheticSpec::new(cfg.d, cfg.seed), cfg.seed)?;
    let g = resolve_regularizer(&cfg.regularizer, &p)?;
    let spec = FlowSpec {
        geometry: cfg.geometry,
        f: Some(p.clone()),
        g: g.clone(),
        t_end: cfg.n_iters as f64 * cfg.dt,
        dt: cfg.dt,
        theta0: Vector::from_element(cfg.d, 1.0 / cfg.d as f64),
    };
    let c = ctx(cfg, &g.to_string(), &cfg.geometry.to_string());
    let keep: Vec<usize> = std::iter::once(0)
        .chain(log_grid(cfg.n_iters, GRID_PER_DECADE).into_iter().map(|n| n as usize))
        .collect();
    let tol = 10.0 * cfg.dt.powi(4);
    for &algo in &cfg.algorithms {
        let trace: FlowTrace = match algo {
            Algorithm::Md => integrate_md_flow(&spec)?,
            _ => integrate_da_flow(&spec)?,
        };
        let star = &trace.theta_star;
        let mut rows: [Vec<Vec<f64>>; 3] = Default::default();
        for &k in &keep {
            let theta = &trace.states[k];
            rows[0].push(vec![trace.lyapunov[k]]);
            rows[1].push(vec![bregman(&cfg.geometry, star, theta)?]);
            rows[2].push(vec![p.psi(&g, theta)? - p.psi(&g, star)?]);
            out.invariants.merge(&InvariantReport::check_point(&p, &g, star, theta)?);
        }
        let ns: Vec<u64> = keep.iter().map(|&k| k as u64).collect();
        for (metric, vals) in ["lyapunov", "bregman_to_optimum", "psi_gap"].iter().zip(&rows) {
            out.table.push_series(&c, algo.name(), "flow", metric, &ns, vals);
        }
        out.derived.push((format!("lyapunov_max_excess_{}", algo.name()), format!("{:e}", trace.max_lyapunov_excess(tol))));
        out.derived.push(("g_at_optimum".into(), format!("{:?}", g_eval(&g, star))));
    }
    out.derived.push(("t_end".into(), format!("{:?}", spec.t_end)));
    Ok(out)
}

/// Validates `cfg` and computes every result without touching the disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    worker_count(cfg)?;
    match cfg.kind {
        ExperimentKind::SyntheticSimplex => run_synthetic(cfg),
        ExperimentKind::L1Dataset => run_dataset(cfg),
        ExperimentKind::LowerBound => run_lower_bound(cfg),
        ExperimentKind::BoundCheck => run_bound_check(cfg),
        ExperimentKind::OdeDemo => run_ode(cfg),
    }
}

fn write_timings(rows: &[TimingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["algorithm", "schedule", "replication", "seed", "n", "seconds"])?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.schedule.clone(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            format!("{:?}", r.seconds),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `results.csv`, `convergence.svg`, `config.resolved` and
/// `timings.csv` under the configured output directory.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<()> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    emit_csv(&outcome.table, &dir.join("results.csv"))?;
    emit_plot(&outcome.table, &dir.join("convergence.svg"))?;
    let mut resolved = cfg.resolved();
    for (k, v) in &outcome.derived {
        resolved.push_str(&format!("# {k}={v}\n"));
    }
    let path = dir.join("config.resolved");
    std::fs::write(&path, resolved).map_err(io_err(&path))?;
    write_timings(&outcome.timings, &dir.join("timings.csv"))
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let outcome = run_experiment(cfg)?;
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}
