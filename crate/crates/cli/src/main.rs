use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dualavg_cli::{execute, parse_pairs, ExperimentConfig, ExperimentKind};

/// Reproduces the dual-averaging experiments: synthetic least squares on the
/// simplex, l1-regularized datasets, the lower-bound instance, continuous
/// flows and bound checks.
#[derive(Parser, Debug)]
#[command(name = "dualavg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Streaming least squares on the simplex (SDA vs averaged SGD).
    Synthetic(Shared),
    /// l1-regularized least squares on a libsvm file.
    Dataset(Shared),
    /// Exact and Monte Carlo values on the lower-bound instance.
    Lowerbound(Shared),
    /// Mirror-descent and dual-averaging flows.
    Ode(Shared),
    /// Additive-noise SDA against its upper bound.
    Bounds(Shared),
}

#[derive(Args, Debug)]
struct Shared {
    /// Flat key=value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Constant step or decaying-step constant; `auto` picks 1/(2R²).
    #[arg(long)]
    gamma: Option<String>,
    /// constant | decaying (repeatable).
    #[arg(long)]
    schedule: Vec<String>,
    /// euclidean | entropy | lp:<p>
    #[arg(long)]
    geometry: Option<String>,
    /// none | simplex[:r] | l1:<lambda> | l2:<nu> | ball:<r>
    #[arg(long)]
    regularizer: Option<String>,
    /// sda | sgd | md | saga | da (repeatable).
    #[arg(long)]
    algo: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Reduced problem size for quick checks.
    #[arg(long)]
    quick: bool,
    /// Worker threads; BENCH_THREADS takes precedence.
    #[arg(long)]
    threads: Option<String>,
    /// libsvm file (dataset experiment).
    #[arg(long)]
    data: Option<String>,
    /// Integrator step (ode experiment).
    #[arg(long)]
    dt: Option<String>,
}

impl Shared {
    fn pairs(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        let scalars = [
            ("d", &self.d),
            ("iters", &self.iters),
            ("reps", &self.reps),
            ("gamma", &self.gamma),
            ("geometry", &self.geometry),
            ("regularizer", &self.regularizer),
            ("seed", &self.seed),
            ("out", &self.out),
            ("threads", &self.threads),
            ("data", &self.data),
            ("dt", &self.dt),
        ];
        pairs.extend(scalars.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        for (k, list) in [("schedule", &self.schedule), ("algo", &self.algo)] {
            if !list.is_empty() {
                pairs.push((k.into(), list.join(",")));
            }
        }
        if self.quick {
            pairs.push(("quick".into(), "true".into()));
        }
        Ok(pairs)
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, shared) = match &cli.command {
        Command::Synthetic(s) => (ExperimentKind::SyntheticSimplex, s),
        Command::Dataset(s) => (ExperimentKind::L1Dataset, s),
        Command::Lowerbound(s) => (ExperimentKind::LowerBound, s),
        Command::Ode(s) => (ExperimentKind::OdeDemo, s),
        Command::Bounds(s) => (ExperimentKind::BoundCheck, s),
    };
    let cfg = ExperimentConfig::from_pairs(kind, &shared.pairs()?)?;
    let outcome = execute(&cfg)?;
    println!("wrote {} rows to {}", outcome.table.len(), cfg.out.join("results.csv").display());
    let inv = outcome.invariants;
    if inv.checkpoints > 0 {
        println!(
            "invariants: {} checkpoints, {} norm-lower violations, {} of {} conversion violations",
            inv.checkpoints, inv.normlower_violations, inv.conversion_violations, inv.conversion_checked
        );
    }
    Ok(())
}
