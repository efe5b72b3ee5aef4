//! Aggregated results and their CSV form.

use std::path::Path;

use crate::error::{io_err, HarnessError, Result};

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "algorithm",
    "schedule",
    "geometry",
    "regularizer",
    "seed_base",
    "replications",
    "n",
    "metric",
    "mean",
    "stderr",
];

/// Columns shared by every row of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RowContext {
    pub experiment: String,
    pub geometry: String,
    pub regularizer: String,
    pub seed_base: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub algorithm: String,
    pub schedule: String,
    pub geometry: String,
    pub regularizer: String,
    pub seed_base: u64,
    pub replications: usize,
    pub n: u64,
    pub metric: String,
    pub mean: f64,
    /// Absent with fewer than two replications.
    pub stderr: Option<f64>,
}

impl ResultRow {
    fn sort_key(&self) -> (&str, u64, &str, &str) {
        (&self.algorithm, self.n, &self.metric, &self.schedule)
    }
}

/// Mean and standard error `s/√R` of per-replication values.
pub fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, Some((var / r).sqrt()))
}

/// Rows sorted by `(algorithm, n, metric, schedule)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Self { rows }
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
        self.rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    /// Aggregates one series: `values[k]` holds the per-replication samples
    /// of `metric` at iteration `ns[k]`.
    pub fn push_series(
        &mut self,
        ctx: &RowContext,
        algorithm: &str,
        schedule: &str,
        metric: &str,
        ns: &[u64],
        values: &[Vec<f64>],
    ) {
        for (&n, samples) in ns.iter().zip(values) {
            let (mean, stderr) = mean_stderr(samples);
            self.rows.push(ResultRow {
                experiment: ctx.experiment.clone(),
                algorithm: algorithm.into(),
                schedule: schedule.into(),
                geometry: ctx.geometry.clone(),
                regularizer: ctx.regularizer.clone(),
                seed_base: ctx.seed_base,
                replications: samples.len(),
                n,
                metric: metric.into(),
                mean,
                stderr,
            });
        }
        self.rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    /// `(n, mean)` of one series in increasing `n`.
    pub fn series(&self, algorithm: &str, schedule: &str, metric: &str) -> Vec<(u64, f64)> {
        let mut pts: Vec<(u64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.schedule == schedule && r.metric == metric)
            .map(|r| (r.n, r.mean))
            .collect();
        pts.sort_by_key(|p| p.0);
        pts
    }

    pub fn find(&self, algorithm: &str, schedule: &str, metric: &str, n: u64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.schedule == schedule && r.metric == metric && r.n == n)
    }

    /// Distinct `(algorithm, schedule)` pairs in table order.
    pub fn series_keys(&self) -> Vec<(String, String)> {
        let mut keys: Vec<(String, String)> =
            self.rows.iter().map(|r| (r.algorithm.clone(), r.schedule.clone())).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.metric.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.algorithm.clone(),
                r.schedule.clone(),
                r.geometry.clone(),
                r.regularizer.clone(),
                r.seed_base.to_string(),
                r.replications.to_string(),
                r.n.to_string(),
                r.metric.clone(),
                format!("{:?}", r.mean),
                r.stderr.map(|s| format!("{s:?}")).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Table(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Table(e.to_string()))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        if r.headers()?.iter().ne(CSV_HEADER) {
            return Err(HarnessError::Table(format!("unexpected header {:?}", r.headers()?)));
        }
        let bad = |what: &str, v: &str| HarnessError::Table(format!("bad {what} {v:?}"));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or_default();
            rows.push(ResultRow {
                experiment: f(0).into(),
                algorithm: f(1).into(),
                schedule: f(2).into(),
                geometry: f(3).into(),
                regularizer: f(4).into(),
                seed_base: f(5).parse().map_err(|_| bad("seed_base", f(5)))?,
                replications: f(6).parse().map_err(|_| bad("replications", f(6)))?,
                n: f(7).parse().map_err(|_| bad("n", f(7)))?,
                metric: f(8).into(),
                mean: f(9).parse().map_err(|_| bad("mean", f(9)))?,
                stderr: match f(10) {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("stderr", s))?),
                },
            });
        }
        Ok(Self::new(rows))
    }
}

/// Writes `table` to `path`; refuses an empty table.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(HarnessError::Table("refusing to write an empty table".into()));
    }
    std::fs::write(path, table.to_csv_string()?).map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    ResultTable::from_csv_str(&text)
}
