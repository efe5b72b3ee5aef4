use std::path::Path;
use std::process::Command;

use dualavg::{
    compute_optimum, generate_synthetic, run_sda, AdditiveNoiseOracle, CheckpointGrid, Composite, Geometry,
    Regularizer, RunOptions, StepSchedule, SyntheticSpec,
};
use dualavg_cli::{
    execute, log_grid, parse_pairs, read_csv, replication_seed, run_experiment, ExperimentConfig, ExperimentKind,
    HarnessError,
};

fn config(kind: ExperimentKind, text: &str) -> ExperimentConfig {
    ExperimentConfig::from_pairs(kind, &parse_pairs(text).unwrap()).unwrap()
}

fn small_synthetic(out: &Path) -> ExperimentConfig {
    config(ExperimentKind::SyntheticSimplex, &format!("d=6\niters=2000\nreps=3\nseed=11\nout={}", out.display()))
}

#[test]
fn execute_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = small_synthetic(&out);
    let outcome = execute(&cfg).unwrap();
    for f in ["results.csv", "convergence.svg", "config.resolved", "timings.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(read_csv(&out.join("results.csv")).unwrap(), outcome.table);

    let resolved = std::fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("d=6") && resolved.contains("# gamma_sda_constant="), "{resolved}");
    // Resolved configs replay to the same table.
    let replay = ExperimentConfig::from_pairs(cfg.kind, &parse_pairs(&resolved).unwrap()).unwrap();
    assert_eq!(run_experiment(&replay).unwrap().table, outcome.table);

    let svg = std::fs::read_to_string(out.join("convergence.svg")).unwrap();
    assert!(svg.contains("sda constant") && svg.contains("sgd decaying"));
    assert!(outcome.invariants.checkpoints > 0 && outcome.invariants.is_clean());
}

#[test]
fn reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = execute(&small_synthetic(&dir.path().join("a"))).unwrap();
    let b = execute(&small_synthetic(&dir.path().join("b"))).unwrap();
    assert_eq!(a.table, b.table);
    let read = |p: &str| std::fs::read(dir.path().join(p).join("results.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn aggregation_matches_direct_runs() {
    let (d, seed, reps, iters) = (5, 21u64, 3usize, 300u64);
    let cfg = config(ExperimentKind::BoundCheck, &format!("d={d}\nseed={seed}\nreps={reps}\niters={iters}"));
    let table = run_experiment(&cfg).unwrap().table;

    let (p, _) = generate_synthetic(SyntheticSpec::new(d, seed), seed).unwrap();
    let comp = Composite::new(Geometry::Euclidean, Regularizer::Zero).unwrap();
    let cert = compute_optimum(&p, &Regularizer::Zero, &Geometry::Euclidean, 1e-10).unwrap();
    let opts = RunOptions::new(StepSchedule::Constant(comp.max_stepsize(p.sigma())), iters)
        .theta0(comp.default_theta0(d))
        .grid(CheckpointGrid::Explicit(log_grid(iters, 10)));
    let finals: Vec<f64> = (0..reps)
        .map(|rep| {
            let mut oracle = AdditiveNoiseOracle::isotropic(p.clone(), 1.0, replication_seed(seed, rep));
            let trace = run_sda(&comp, &mut oracle, &opts).unwrap();
            let avg = &trace.checkpoints.last().unwrap().theta_avg;
            0.5 * p.mahalanobis_sq(&(avg - &cert.theta)).unwrap()
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / reps as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);

    let row = table.find("sda", "constant", "mahalanobis_avg", iters).unwrap();
    assert_eq!(row.replications, reps);
    assert!((row.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0), "{} vs {mean}", row.mean);
    assert!((row.stderr.unwrap() - (var / reps as f64).sqrt()).abs() <= 1e-12);
}

#[test]
fn failing_replication_reports_its_seed() {
    let cfg = config(
        ExperimentKind::SyntheticSimplex,
        "d=4\niters=200\nreps=2\nseed=5\ngeometry=entropy\nregularizer=none\nalgo=md\nschedule=constant\ngamma=1e6",
    );
    match run_experiment(&cfg) {
        Err(HarnessError::Replication { seed, .. }) => assert!([replication_seed(5, 0), replication_seed(5, 1)].contains(&seed)),
        other => panic!("expected a replication error, got {other:?}"),
    }
}

#[test]
fn config_errors_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let pairs = parse_pairs(&format!("algo=saga\nschedule=decaying\ndata=x.svm\nout={}", out.display())).unwrap();
    let err = ExperimentConfig::from_pairs(ExperimentKind::L1Dataset, &pairs).and_then(|c| execute(&c));
    assert!(matches!(err, Err(HarnessError::Config(_))), "{err:?}");
    assert!(!out.exists());

    assert!(matches!(parse_pairs("d=3\nnot a pair\n"), Err(HarnessError::ConfigLine { line: 2, .. })));
    assert!(ExperimentConfig::from_pairs(ExperimentKind::SyntheticSimplex, &parse_pairs("nonsense=1").unwrap()).is_err());
}

#[test]
fn binary_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cli");
    let bin = env!("CARGO_BIN_EXE_dualavg");
    let status = Command::new(bin)
        .args(["lowerbound", "--iters", "50", "--reps", "20", "--out"])
        .arg(&out)
        .env_remove("BENCH_THREADS")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("rows"));
    let table = read_csv(&out.join("results.csv")).unwrap();
    assert!(table.find("sda", "constant", "lb_exact", 50).is_some());

    let bad = Command::new(bin)
        .args(["bounds", "--quick", "--out"])
        .arg(dir.path().join("bad"))
        .env("BENCH_THREADS", "0")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(!dir.path().join("bad").exists());
}
