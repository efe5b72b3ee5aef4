use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LeastSquaresStream, QuadraticProblem, Sampler};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SpdMatrix, Vector};

/// Densified finite dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<Vector>,
    labels: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vector>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
        }
        let dim = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vector] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Drops rows whose norm exceeds `factor` times the mean row norm.
    /// Returns the filtered dataset and the number of rows removed.
    pub fn remove_outliers(&self, factor: f64) -> Result<(Dataset, usize)> {
        let norms: Vec<f64> = self.rows.iter().map(|r| r.norm()).collect();
        let cutoff = factor * norms.iter().sum::<f64>() / norms.len() as f64;
        let (rows, labels): (Vec<_>, Vec<_>) = self
            .rows
            .iter()
            .zip(&self.labels)
            .zip(&norms)
            .filter(|(_, &n)| n <= cutoff)
            .map(|((r, &y), _)| (r.clone(), y))
            .unzip();
        let removed = self.len() - rows.len();
        Ok((Dataset::new(rows, labels)?, removed))
    }

    /// Seeded shuffle, then the first `⌈n/2⌉` rows train and the rest test.
    pub fn split_half(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        if self.len() < 2 {
            return Err(Error::InvalidParameter("need at least two rows to split".into()));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = self.len().div_ceil(2);
        let pick = |ids: &[usize]| {
            Dataset::new(
                ids.iter().map(|&i| self.rows[i].clone()).collect(),
                ids.iter().map(|&i| self.labels[i]).collect(),
            )
        };
        Ok((pick(&idx[..cut])?, pick(&idx[cut..])?))
    }

    /// Empirical quadratic `Σ = mean x xᵀ`, `q = mean y x`. When `Σ` is
    /// singular, `ridge · tr(Σ)/d` is added to its diagonal.
    pub fn to_problem(&self, ridge: f64) -> Result<QuadraticProblem> {
        let d = self.dim;
        let n = self.len() as f64;
        let mut sigma = Matrix::zeros(d, d);
        let mut q = Vector::zeros(d);
        for (x, &y) in self.rows.iter().zip(&self.labels) {
            sigma.ger(1.0 / n, x, x, 1.0);
            q.axpy(y / n, x, 1.0);
        }
        let spd = match SpdMatrix::new(sigma.clone()) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. }) => {
                let shift = ridge * (sigma.trace() / d as f64).max(f64::MIN_POSITIVE);
                log::warn!("empirical covariance is singular; adding {shift:e} to its diagonal");
                SpdMatrix::new(sigma + Matrix::identity(d, d) * shift)?
            }
            Err(e) => return Err(e),
        };
        QuadraticProblem::new(spd, q)
    }

    /// Stream sampling rows uniformly with replacement.
    pub fn stream(&self, seed: u64) -> LeastSquaresStream {
        LeastSquaresStream::new(Sampler::Finite { rows: self.rows.clone(), labels: self.labels.clone() }, seed)
    }
}

/// Parses libsvm text: `label idx:val ...` with 1-based strictly ascending
/// indices. The dimension is the largest index in the file.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let mut tokens = line.split_whitespace();
        let label: f64 = tokens
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|_| err("invalid label".into()))?;
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, got {tok:?}")))?;
            let i: usize = i.parse().map_err(|_| err(format!("invalid index {i:?}")))?;
            let v: f64 = v.parse().map_err(|_| err(format!("invalid value {v:?}")))?;
            if i == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if i <= last {
                return Err(err(format!("index {i} not strictly ascending")));
            }
            last = i;
            entries.push((i - 1, v));
        }
        dim = dim.max(last);
        sparse.push(entries);
        labels.push(label);
    }
    if sparse.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = sparse
        .into_iter()
        .map(|entries| {
            let mut x = Vector::zeros(dim);
            for (i, v) in entries {
                x[i] = v;
            }
            x
        })
        .collect();
    Dataset::new(rows, labels)
}

pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_libsvm(&std::fs::read_to_string(path)?)
}
