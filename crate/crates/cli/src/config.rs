//! Flat `key=value` experiment configuration.
//!
//! A config is resolved in three layers: per-kind defaults (shrunk by
//! `quick`), then a config file, then command-line overrides. The resolved
//! form is itself a valid config file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dualavg::regularizer::is_supported;
use dualavg::{Algorithm, Geometry, Regularizer};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    SyntheticSimplex,
    L1Dataset,
    LowerBound,
    OdeDemo,
    BoundCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::SyntheticSimplex,
        ExperimentKind::L1Dataset,
        ExperimentKind::LowerBound,
        ExperimentKind::OdeDemo,
        ExperimentKind::BoundCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SyntheticSimplex => "synthetic-simplex",
            ExperimentKind::L1Dataset => "l1-dataset",
            ExperimentKind::LowerBound => "lower-bound",
            ExperimentKind::OdeDemo => "ode-demo",
            ExperimentKind::BoundCheck => "bound-check",
        }
    }

    /// CLI subcommand running this kind.
    pub fn subcommand(self) -> &'static str {
        match self {
            ExperimentKind::SyntheticSimplex => "synthetic",
            ExperimentKind::L1Dataset => "dataset",
            ExperimentKind::LowerBound => "lowerbound",
            ExperimentKind::OdeDemo => "ode",
            ExperimentKind::BoundCheck => "bounds",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.subcommand() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScheduleKind {
    Constant,
    /// `γ_n = γ/√n`.
    Decaying,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Decaying => "decaying",
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "decaying" => Ok(ScheduleKind::Decaying),
            _ => Err(HarnessError::Config(format!("unknown schedule {s:?} (constant|decaying)"))),
        }
    }
}

/// A regularizer, or a simplex whose radius is `‖θ_Σ‖₁/2` of the generated
/// problem.
#[derive(Clone, Debug, PartialEq)]
pub enum RegularizerChoice {
    Fixed(Regularizer),
    AutoSimplex,
}

impl fmt::Display for RegularizerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizerChoice::Fixed(g) => write!(f, "{g}"),
            RegularizerChoice::AutoSimplex => f.write_str("simplex"),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| HarnessError::Config(format!("{key}: expected a number, got {v:?}")))
}

/// Integer that may be written as `1e6`.
fn parse_count(key: &str, v: &str) -> Result<u64> {
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    let x = parse_f64(key, v)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(HarnessError::Config(format!("{key}: expected a nonnegative integer, got {v:?}")))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

pub fn parse_geometry(s: &str) -> Result<Geometry> {
    match s.split_once(':') {
        None if s == "euclidean" => Ok(Geometry::Euclidean),
        None if s == "entropy" => Ok(Geometry::NegativeEntropy),
        Some(("lp", p)) => Ok(Geometry::lp(parse_f64("geometry", p)?)?),
        _ => Err(HarnessError::Config(format!("unknown geometry {s:?} (euclidean|entropy|lp:<p>)"))),
    }
}

pub fn parse_regularizer(s: &str) -> Result<RegularizerChoice> {
    let fixed = match s.split_once(':') {
        None if s == "none" => Regularizer::Zero,
        None if s == "simplex" => return Ok(RegularizerChoice::AutoSimplex),
        Some(("simplex", r)) => Regularizer::simplex(parse_f64("regularizer", r)?)?,
        Some(("l1", l)) => Regularizer::l1(parse_f64("regularizer", l)?)?,
        Some(("l2", nu)) => Regularizer::ridge(parse_f64("regularizer", nu)?, None)?,
        Some(("ball", r)) => Regularizer::l2_ball(parse_f64("regularizer", r)?)?,
        _ => {
            return Err(HarnessError::Config(format!(
                "unknown regularizer {s:?} (none|simplex[:r]|l1:<lambda>|l2:<nu>|ball:<r>)"
            )))
        }
    };
    Ok(RegularizerChoice::Fixed(fixed))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| HarnessError::Config(format!("{key}: {e}"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(HarnessError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

/// `key=value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(line, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| HarnessError::ConfigLine { line, msg: format!("expected key=value, got {l:?}") })?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub quick: bool,
    pub d: usize,
    pub n_iters: u64,
    pub replications: usize,
    pub algorithms: Vec<Algorithm>,
    pub schedules: Vec<ScheduleKind>,
    /// Constant step, or the constant of `γ/√n`; `None` picks the default.
    pub gamma: Option<f64>,
    pub geometry: Geometry,
    pub regularizer: RegularizerChoice,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker count; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// libsvm file for the dataset experiment.
    pub data: Option<PathBuf>,
    /// Integrator step of the flow experiment.
    pub dt: f64,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind, quick: bool) -> Self {
        let mut c = Self {
            kind,
            quick,
            d: 100,
            n_iters: 1_000_000,
            replications: 10,
            algorithms: vec![Algorithm::Sda, Algorithm::Sgd],
            schedules: vec![ScheduleKind::Constant, ScheduleKind::Decaying],
            gamma: None,
            geometry: Geometry::Euclidean,
            regularizer: RegularizerChoice::AutoSimplex,
            seed: 0,
            out: PathBuf::from("results").join(kind.subcommand()),
            threads: None,
            data: None,
            dt: 0.01,
        };
        match kind {
            ExperimentKind::SyntheticSimplex => {
                if quick {
                    c.d = 20;
                    c.n_iters = 100_000;
                }
            }
            ExperimentKind::L1Dataset => {
                c.n_iters = if quick { 10_000 } else { 100_000 };
                c.algorithms = vec![Algorithm::Sda, Algorithm::Sgd, Algorithm::Saga];
                c.schedules = vec![ScheduleKind::Constant];
                c.regularizer = RegularizerChoice::Fixed(Regularizer::L1 { lambda: 1e-3 });
            }
            ExperimentKind::LowerBound => {
                c.d = 2;
                c.n_iters = 100;
                c.replications = if quick { 200 } else { 2000 };
                c.algorithms = vec![Algorithm::Sda];
                c.schedules = vec![ScheduleKind::Constant];
                c.gamma = Some(1.0);
                c.regularizer = RegularizerChoice::Fixed(Regularizer::Zero);
            }
            ExperimentKind::OdeDemo => {
                c.d = 3;
                c.n_iters = if quick { 200 } else { 1000 };
                c.replications = 1;
                c.algorithms = vec![Algorithm::Md, Algorithm::Da];
                c.schedules = vec![ScheduleKind::Constant];
                c.regularizer = RegularizerChoice::Fixed(Regularizer::QuadraticL2 {
                    weight: dualavg::QuadraticWeight::Scalar(1.0),
                    center: None,
                });
            }
            ExperimentKind::BoundCheck => {
                c.d = 10;
                c.n_iters = if quick { 1000 } else { 10_000 };
                c.replications = if quick { 100 } else { 1000 };
                c.algorithms = vec![Algorithm::Sda];
                c.schedules = vec![ScheduleKind::Constant];
                c.regularizer = RegularizerChoice::Fixed(Regularizer::Zero);
            }
        }
        c
    }

    /// Builds a config from layered `key=value` pairs (file first, then
    /// overrides). A `quick` key anywhere selects the reduced defaults.
    pub fn from_pairs(kind: ExperimentKind, pairs: &[(String, String)]) -> Result<Self> {
        let quick = pairs
            .iter()
            .rfind(|(k, _)| k == "quick")
            .map(|(k, v)| parse_bool(k, v))
            .transpose()?
            .unwrap_or(false);
        let mut c = Self::defaults(kind, quick);
        for (k, v) in pairs {
            c.apply(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "kind" => {
                let kind: ExperimentKind = v.parse()?;
                if kind != self.kind {
                    return Err(HarnessError::Config(format!("config is for {kind}, not {}", self.kind)));
                }
            }
            "quick" => self.quick = parse_bool(key, v)?,
            "d" => self.d = parse_count(key, v)? as usize,
            "iters" => self.n_iters = parse_count(key, v)?,
            "reps" => self.replications = parse_count(key, v)? as usize,
            "algo" => self.algorithms = parse_list(key, v)?,
            "schedule" => self.schedules = parse_list(key, v)?,
            "gamma" => self.gamma = if v == "auto" { None } else { Some(parse_f64(key, v)?) },
            "geometry" => self.geometry = parse_geometry(v)?,
            "regularizer" => self.regularizer = parse_regularizer(v)?,
            "seed" => self.seed = parse_count(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = if v == "auto" { None } else { Some(parse_count(key, v)? as usize) },
            "data" => self.data = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "dt" => self.dt = parse_f64(key, v)?,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.replications < 1 {
            return bad("reps must be at least 1".into());
        }
        if self.n_iters < 1 {
            return bad("iters must be at least 1".into());
        }
        if self.d < 1 {
            return bad("d must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
            return bad(format!("gamma must be positive, got {:?}", self.gamma));
        }
        // Flows need Hessians, not composite maps, so any smooth pair works.
        if self.kind != ExperimentKind::OdeDemo {
            let g = match &self.regularizer {
                RegularizerChoice::Fixed(g) => g.clone(),
                RegularizerChoice::AutoSimplex => Regularizer::IndicatorSimplex { radius: 1.0 },
            };
            if !is_supported(&self.geometry, &g) {
                return bad(format!("geometry {} does not support regularizer {}", self.geometry, self.regularizer));
            }
        }
        let allowed: &[Algorithm] = match self.kind {
            ExperimentKind::SyntheticSimplex => &[Algorithm::Sda, Algorithm::Sgd, Algorithm::Md, Algorithm::Da],
            ExperimentKind::L1Dataset => &[Algorithm::Sda, Algorithm::Sgd, Algorithm::Md, Algorithm::Saga],
            ExperimentKind::LowerBound | ExperimentKind::BoundCheck => &[Algorithm::Sda],
            ExperimentKind::OdeDemo => &[Algorithm::Md, Algorithm::Da],
        };
        if let Some(a) = self.algorithms.iter().find(|a| !allowed.contains(a)) {
            return bad(format!("algorithm {a} is not available in the {} experiment", self.kind));
        }
        if self.algorithms.contains(&Algorithm::Saga) && self.schedules.contains(&ScheduleKind::Decaying) {
            return bad("saga needs a constant schedule; drop decaying or saga".into());
        }
        match self.kind {
            ExperimentKind::L1Dataset if self.data.is_none() => bad("the dataset experiment needs data=<libsvm file>".into()),
            ExperimentKind::LowerBound if self.d < 2 => bad("the lower-bound instance needs d >= 2".into()),
            ExperimentKind::LowerBound | ExperimentKind::BoundCheck if self.schedules != [ScheduleKind::Constant] => {
                bad(format!("the {} experiment uses a constant schedule only", self.kind))
            }
            ExperimentKind::OdeDemo => {
                if !(self.dt > 0.0 && self.dt.is_finite()) {
                    return bad(format!("dt must be positive, got {}", self.dt));
                }
                match &self.regularizer {
                    RegularizerChoice::Fixed(g) if g.is_smooth() => Ok(()),
                    g => bad(format!("the flow experiment needs a smooth regularizer (none or l2), got {g}")),
                }
            }
            _ => Ok(()),
        }
    }

    /// Echo of every key, loadable with [`parse_pairs`].
    pub fn resolved(&self) -> String {
        let join = |v: Vec<&str>| v.join(",");
        let opt = |x: Option<String>| x.unwrap_or_else(|| "auto".into());
        let lines = [
            ("kind", self.kind.name().to_string()),
            ("quick", self.quick.to_string()),
            ("d", self.d.to_string()),
            ("iters", self.n_iters.to_string()),
            ("reps", self.replications.to_string()),
            ("algo", join(self.algorithms.iter().map(|a| a.name()).collect())),
            ("schedule", join(self.schedules.iter().map(|s| s.name()).collect())),
            ("gamma", opt(self.gamma.map(|g| format!("{g:?}")))),
            ("geometry", self.geometry.to_string()),
            ("regularizer", self.regularizer.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("threads", opt(self.threads.map(|t| t.to_string()))),
            ("data", self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("dt", format!("{:?}", self.dt)),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
