use super::*;
use crate::geometry::bregman;
use crate::numerics::{spd_solve, Matrix, RngStream};
use crate::problems::{compute_optimum, AdditiveNoiseOracle, Dataset, ZeroGradient, DEFAULT_OPTIMUM_TOL};
use crate::regularizer::{g_eval, QuadraticWeight};
use proptest::prelude::*;

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn scalar_problem(sigma: f64, q: f64) -> QuadraticProblem {
    QuadraticProblem::new(SpdMatrix::from_diagonal(&v(&[sigma])).unwrap(), v(&[q])).unwrap()
}

fn euclid(g: Regularizer) -> Composite {
    Composite::new(Geometry::Euclidean, g).unwrap()
}

fn random_problem(rng: &mut RngStream, d: usize) -> QuadraticProblem {
    let a = rng.normal_matrix(d, d);
    let sigma = SpdMatrix::new(&a * a.transpose() / d as f64 + Matrix::identity(d, d) * 0.05).unwrap();
    QuadraticProblem::new(sigma, rng.normal_vector(d)).unwrap()
}

/// Records every gradient the wrapped oracle returns.
struct Recording<O> {
    inner: O,
    sum: Vector,
}

impl<O: GradientOracle> GradientOracle for Recording<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn gradient(&mut self, theta: &Vector) -> Result<Vector> {
        let g = self.inner.gradient(theta)?;
        self.sum += &g;
        Ok(g)
    }
}

#[test]
fn da_one_gradient_step() {
    let p = scalar_problem(1.0, 0.0);
    let opts = RunOptions::new(StepSchedule::Constant(0.5), 1).theta0(v(&[1.0]));
    let t = run_da(&euclid(Regularizer::Zero), &p, &opts).unwrap();
    let th = &t.checkpoints[0].theta;
    assert_eq!(th[0], 0.5);
    let gap = p.f(th).unwrap() - p.f_min();
    assert_eq!(gap, 0.125);
    let dh = bregman(&Geometry::Euclidean, &v(&[0.0]), &v(&[1.0])).unwrap();
    assert!(gap <= dh / (0.5 * 2.0));
}

#[test]
fn da_exact_one_step_convergence() {
    let p = scalar_problem(1.0, 0.0);
    let opts = RunOptions::new(StepSchedule::Constant(1.0), 4).theta0(v(&[1.0]));
    let t = run_da(&euclid(Regularizer::Zero), &p, &opts).unwrap();
    assert!(t.checkpoints.iter().all(|c| c.theta[0] == 0.0));
}

#[test]
fn md_contraction_example() {
    let g = Regularizer::ridge(1.0, Some(v(&[2.0]))).unwrap();
    let opts = RunOptions::new(StepSchedule::Constant(1.0), 3).theta0(v(&[3.0]));
    let t = run_md(&euclid(g), &mut ZeroGradient(1), &opts).unwrap();
    assert_eq!(t.checkpoints[0].theta[0] - 2.0, 0.5);
    assert_eq!(t.checkpoints[2].theta[0] - 2.0, 0.125);
}

#[test]
fn zero_regularizer_md_is_gradient_descent_and_matches_da() {
    let mut rng = RngStream::new(3);
    let p = random_problem(&mut rng, 4);
    let gamma = 1.0 / p.sigma().max_eigenvalue();
    let opts = RunOptions::new(StepSchedule::Constant(gamma), 50).grid(CheckpointGrid::Every(1));
    let comp = euclid(Regularizer::Zero);
    let md = run_md(&comp, &mut ExactGradient(&p), &opts).unwrap();
    let da = run_da(&comp, &p, &opts).unwrap();
    let mut theta = Vector::zeros(4);
    for (m, d) in md.checkpoints.iter().zip(&da.checkpoints) {
        theta -= p.full_gradient(&theta).unwrap() * gamma;
        assert_eq!(m.theta, theta);
        assert_eq!(d.theta, theta);
    }
    let sgd = run_sgd(&Regularizer::Zero, &mut ExactGradient(&p), &opts).unwrap();
    assert_eq!(sgd.checkpoints.last().unwrap().theta, md.checkpoints.last().unwrap().theta);

    // Entropy without a constraint: multiplicative and dual forms agree.
    let target = Vector::from_fn(4, |i, _| 0.1 + 0.05 * i as f64);
    let pe = QuadraticProblem::from_minimizer(p.sigma().clone(), target).unwrap();
    let ent = Composite::new(Geometry::NegativeEntropy, Regularizer::Zero).unwrap();
    let g = ent.max_stepsize(pe.sigma());
    let opts = RunOptions::new(StepSchedule::Constant(g), 200);
    let md = run_md(&ent, &mut ExactGradient(&pe), &opts).unwrap();
    let da = run_da(&ent, &pe, &opts).unwrap();
    for (m, d) in md.checkpoints.iter().zip(&da.checkpoints) {
        assert!((&m.theta - &d.theta).norm() <= 1e-12 * (1.0 + d.theta.norm()));
    }
}

#[test]
fn average_examples() {
    let mut a = Averager::new(1);
    assert!(a.mean().is_err());
    a.push(&v(&[2.0]));
    assert_eq!(a.mean().unwrap(), v(&[2.0]));
    let mut b = Averager::new(1);
    b.push(&v(&[0.0]));
    b.push(&v(&[2.0]));
    assert_eq!(b.mean().unwrap(), v(&[1.0]));
    let mut c = Averager::new(2);
    for _ in 0..1000 {
        c.push(&v(&[0.1, -3.0]));
    }
    assert!((c.mean().unwrap() - v(&[0.1, -3.0])).norm() <= 1e-15);
    let state = OptimizerState { n: 1, eta: v(&[0.0]), theta: v(&[0.0]), averager: a };
    assert_eq!(average(&state).unwrap(), v(&[2.0]));
}

#[test]
fn checkpoint_grid() {
    assert_eq!(CheckpointGrid::Geometric.points(10), vec![1, 2, 4, 8, 10]);
    assert_eq!(CheckpointGrid::Geometric.points(8), vec![1, 2, 4, 8]);
    assert_eq!(CheckpointGrid::Every(3).points(7), vec![3, 6, 7]);
    assert_eq!(CheckpointGrid::Explicit(vec![5, 1, 5, 20]).points(10), vec![1, 5]);
    assert!(CheckpointGrid::Geometric.points(0).is_empty());
}

#[test]
fn schedules() {
    assert!(StepSchedule::constant(0.0).is_err());
    assert!(StepSchedule::decaying(f64::NAN).is_err());
    let s = StepSchedule::Decaying(2.0);
    assert_eq!(s.gamma(4), 1.0);
    let mut c = StepCursor::new(s);
    let taus: Vec<f64> = (0..3).map(|_| c.advance().1).collect();
    assert!((taus[2] - (2.0 + 2.0 / 2f64.sqrt() + 2.0 / 3f64.sqrt())).abs() < 1e-15);
    let mut c = StepCursor::new(StepSchedule::Constant(0.1));
    let last = (0..10).map(|_| c.advance().1).last().unwrap();
    assert_eq!(last, 10.0 * 0.1);
    assert_eq!("sda".parse::<Algorithm>().unwrap(), Algorithm::Sda);
    assert!("adam".parse::<Algorithm>().is_err());
}

#[test]
fn entropy_start_must_be_interior() {
    let p = QuadraticProblem::new(SpdMatrix::identity(2), v(&[1.0, 1.0])).unwrap();
    let comp = Composite::new(Geometry::NegativeEntropy, Regularizer::simplex(1.0).unwrap()).unwrap();
    let opts = RunOptions::new(StepSchedule::Constant(0.1), 5).theta0(v(&[1.0, 0.0]));
    assert!(matches!(run_da(&comp, &p, &opts), Err(Error::Domain(_))));
    assert!(Composite::new(Geometry::NegativeEntropy, Regularizer::l1(1.0).unwrap()).is_err());
}

fn composites(d: usize, r: f64) -> Vec<Composite> {
    let simplex = Regularizer::simplex(r).unwrap();
    vec![
        euclid(Regularizer::Zero),
        euclid(simplex.clone()),
        euclid(Regularizer::l1(0.1).unwrap()),
        euclid(Regularizer::l2_ball(0.5).unwrap()),
        Composite::new(Geometry::NegativeEntropy, simplex).unwrap(),
        Composite::new(Geometry::lp(1.0 + 1.0 / (d as f64).ln().max(1.0)).unwrap(), Regularizer::l1(0.1).unwrap())
            .unwrap(),
    ]
}

#[test]
fn deterministic_da_invariants() {
    let mut rng = RngStream::new(17);
    for trial in 0..6 {
        let d = 3 + trial;
        let p = random_problem(&mut rng, d);
        for comp in composites(d, 1.0) {
            let gamma = comp.max_stepsize(p.sigma());
            let opts = RunOptions::new(StepSchedule::Constant(gamma), 2000).grid(CheckpointGrid::Every(1));
            let mut oracle = Recording { inner: ExactGradient(&p), sum: Vector::zeros(d) };
            let t = run_sda(&comp, &mut oracle, &opts).unwrap();
            let cert = compute_optimum(&p, comp.regularizer(), comp.geometry(), DEFAULT_OPTIMUM_TOL)
                .unwrap_or_else(|e| panic!("{comp:?}: {e}"));
            let g = comp.regularizer();
            let dh = bregman(comp.geometry(), &cert.theta, &t.theta0).unwrap();
            let mut prev = f64::INFINITY;
            for c in &t.checkpoints {
                let psi = p.psi(g, &c.theta).unwrap();
                assert!(psi <= prev + 1e-12 * (1.0 + psi.abs()), "{comp:?} n={}", c.n);
                prev = psi;
                let gap = p.psi_gap(g, &c.theta, &cert.theta).unwrap();
                assert!(gap <= dh / (gamma * (c.n + 1) as f64) + 1e-9, "{comp:?}");
                if g.is_indicator() {
                    assert_eq!(g_eval(g, &c.theta), 0.0);
                    assert_eq!(g_eval(g, &c.theta_avg), 0.0);
                }
                let lhs = 0.5 * p.mahalanobis_sq(&(&c.theta_avg - &cert.theta)).unwrap();
                assert!(lhs <= p.psi_gap(g, &c.theta_avg, &cert.theta).unwrap() + 1e-8);
            }
            let eta0 = h_grad(comp.geometry(), &t.theta0).unwrap();
            let last = t.last().unwrap();
            let eta = last.eta.as_ref().unwrap();
            let expected = eta0 - &oracle.sum * gamma;
            assert!((eta - expected).norm() <= 1e-10 * (1.0 + eta.norm()));
        }
    }
}

#[test]
fn zero_noise_sda_is_bit_exact_da() {
    let mut rng = RngStream::new(5);
    let p = random_problem(&mut rng, 5);
    for comp in composites(5, 2.0) {
        let gamma = comp.max_stepsize(p.sigma());
        let opts = RunOptions::new(StepSchedule::Constant(gamma), 300);
        let da = run_da(&comp, &p, &opts).unwrap();
        let mut oracle = AdditiveNoiseOracle::new(p.clone(), Matrix::zeros(5, 5), 9).unwrap();
        let sda = run_sda(&comp, &mut oracle, &opts).unwrap();
        for (a, b) in da.checkpoints.iter().zip(&sda.checkpoints) {
            assert_eq!(a.theta_hash(), b.theta_hash());
            assert_eq!(a, b);
        }
    }
}

#[test]
fn seeded_runs_are_reproducible() {
    let mut rng = RngStream::new(8);
    let p = random_problem(&mut rng, 4);
    let comp = euclid(Regularizer::simplex(1.0).unwrap());
    let opts = RunOptions::new(StepSchedule::Decaying(0.3), 500);
    let run = |seed| {
        let mut o = AdditiveNoiseOracle::isotropic(p.clone(), 0.5, seed);
        run_sda(&comp, &mut o, &opts).unwrap()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
    assert_eq!(run(1).seed, Some(1));
}

#[test]
fn decaying_sda_stays_feasible() {
    let mut rng = RngStream::new(12);
    let p = random_problem(&mut rng, 6);
    for comp in composites(6, 1.5).into_iter().filter(|c| c.regularizer().is_indicator()) {
        let mut o = AdditiveNoiseOracle::isotropic(p.clone(), 1.0, 3);
        let t = run_sda(&comp, &mut o, &RunOptions::new(StepSchedule::Decaying(0.2), 1000)).unwrap();
        for c in &t.checkpoints {
            assert_eq!(g_eval(comp.regularizer(), &c.theta), 0.0);
            assert_eq!(g_eval(comp.regularizer(), &c.theta_avg), 0.0);
        }
    }
}

fn ridge_dataset(rng: &mut RngStream, n: usize, d: usize) -> Dataset {
    let rows: Vec<Vector> = (0..n).map(|_| rng.normal_vector(d)).collect();
    let labels = (0..n).map(|_| rng.normal()).collect();
    Dataset::new(rows, labels).unwrap()
}

#[test]
fn saga_single_sample_is_gradient_descent() {
    let ds = Dataset::new(vec![v(&[1.0, 2.0])], vec![3.0]).unwrap();
    let gamma = saga_default_step(&ds).unwrap();
    let opts = RunOptions::new(StepSchedule::Constant(gamma), 20).grid(CheckpointGrid::Every(1));
    let t = run_saga(&Regularizer::Zero, &ds, &opts, SagaConfig::default()).unwrap();
    let x = v(&[1.0, 2.0]);
    let mut theta = Vector::zeros(2);
    for c in &t.checkpoints {
        theta -= &x * ((x.dot(&theta) - 3.0) * gamma);
        assert!((&c.theta - &theta).norm() <= 1e-14);
    }
}

#[test]
fn saga_converges_linearly_with_ridge() {
    let mut rng = RngStream::new(21);
    let (n, d, nu) = (40, 5, 1.0);
    let ds = ridge_dataset(&mut rng, n, d);
    let p = ds.to_problem(0.0).unwrap();
    let ridged = SpdMatrix::new(p.sigma().matrix() + Matrix::identity(d, d) * nu).unwrap();
    let exact = spd_solve(&ridged, p.q()).unwrap();
    let g = Regularizer::ridge(nu, None).unwrap();
    let psi = |th: &Vector| p.psi(&g, th).unwrap();
    let opts = RunOptions::new(StepSchedule::Constant(saga_default_step(&ds).unwrap()), 50 * n as u64);
    let t = run_saga(&g, &ds, &opts, SagaConfig { seed: 4, ..SagaConfig::default() }).unwrap();
    let subopt = psi(&t.last().unwrap().theta) - psi(&exact);
    assert!(subopt < 1e-10, "suboptimality {subopt:e}");

    assert!(run_saga(&g, &ds, &opts, SagaConfig { seed: 0, table_cap: 10 }).is_err());
    let decaying = RunOptions::new(StepSchedule::Decaying(0.1), 10);
    assert!(run_saga(&g, &ds, &decaying, SagaConfig::default()).is_err());
}

#[test]
fn saga_table_mean_is_consistent() {
    let mut rng = RngStream::new(2);
    let ds = ridge_dataset(&mut rng, 30, 3);
    let mut theta = Vector::zeros(3);
    let mut s = SagaState::new(&ds, &theta, 100).unwrap();
    for k in 0..1000 {
        let j = rng.index(ds.len());
        let est = s.estimate(j, &theta);
        theta -= est * 0.01;
        if k % 97 == 0 {
            assert!((s.mean() - s.recomputed_mean()).amax() <= 1e-12);
        }
    }
}

#[test]
fn quadratic_regularizer_md_and_da_closed_forms() {
    let nu = 0.7;
    let gamma = 0.4;
    let center = v(&[1.0, -2.0]);
    let g = Regularizer::QuadraticL2 { weight: QuadraticWeight::Scalar(nu), center: Some(center.clone()) };
    let theta0 = v(&[0.5, 0.5]);
    let opts = RunOptions::new(StepSchedule::Constant(gamma), 30).theta0(theta0.clone()).grid(CheckpointGrid::Every(1));
    let comp = euclid(g);
    let da = run_sda(&comp, &mut ZeroGradient(2), &opts).unwrap();
    let md = run_md(&comp, &mut ZeroGradient(2), &opts).unwrap();
    for (a, b) in da.checkpoints.iter().zip(&md.checkpoints) {
        let n = a.n as f64;
        let da_expected = &center + (&theta0 - &center) / (1.0 + n * gamma * nu);
        let md_expected = &center + (&theta0 - &center) / (1.0 + gamma * nu).powf(n);
        assert!((&a.theta - da_expected).norm() <= 1e-12);
        assert!((&b.theta - md_expected).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn feasibility_under_noise(seed in 0u64..1000, r in 0.2f64..3.0, gamma in 0.01f64..2.0) {
        let mut rng = RngStream::new(seed);
        let p = random_problem(&mut rng, 4);
        for comp in composites(4, r).into_iter().filter(|c| c.regularizer().is_indicator()) {
            let mut o = AdditiveNoiseOracle::isotropic(p.clone(), 1.0, seed);
            let opts = RunOptions::new(StepSchedule::Constant(gamma), 64);
            let t = run_sda(&comp, &mut o, &opts).unwrap();
            let mut o = AdditiveNoiseOracle::isotropic(p.clone(), 1.0, seed);
            let m = run_md(&comp, &mut o, &opts).unwrap();
            for c in t.checkpoints.iter().chain(&m.checkpoints) {
                prop_assert_eq!(g_eval(comp.regularizer(), &c.theta), 0.0);
                prop_assert_eq!(g_eval(comp.regularizer(), &c.theta_avg), 0.0);
            }
        }
    }
}
