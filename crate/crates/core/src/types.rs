//! Domain types shared by every stage of the pipeline, plus the two read-out
//! primitives of the vote matrix: row normalization and majority estimation.
//!
//! Cluster labels and case indices are zero-based in memory. Text outputs
//! (TSV, JSON) use one-based labels and case numbers.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An N×M matrix of finite feature values, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    row_ids: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major values. Row ids default to `1..=N`.
    pub fn new(values: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        let ids = (1..=n_rows).map(|i| i.to_string()).collect();
        Self::with_ids(values, n_rows, n_cols, ids)
    }

    pub fn with_ids(values: Vec<f64>, n_rows: usize, n_cols: usize, row_ids: Vec<String>) -> Result<Self> {
        if n_rows < 2 {
            return Err(Error::InvalidData(format!("need at least 2 cases, got {n_rows}")));
        }
        if n_cols < 1 {
            return Err(Error::InvalidData("need at least 1 feature".into()));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n_rows * n_cols,
            });
        }
        if row_ids.len() != n_rows {
            return Err(Error::LengthMismatch {
                left: row_ids.len(),
                right: n_rows,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                line: pos / n_cols,
                column: pos % n_cols,
            });
        }
        Ok(Self {
            values,
            n_rows,
            n_cols,
            row_ids,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: n_cols,
            });
        }
        Self::new(rows.concat(), rows.len(), n_cols)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A crisp partition: one label in `0..k` per case.
///
/// Not every label has to be occupied; degenerate solutions are representable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrispAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl CrispAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::KTooSmall(0));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidData(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// Builds an assignment from arbitrary label values, numbering them in
    /// order of first appearance.
    pub fn from_codes<T: PartialEq + Clone>(codes: &[T]) -> Self {
        let mut seen: Vec<T> = Vec::new();
        let labels = codes
            .iter()
            .map(|c| match seen.iter().position(|s| s == c) {
                Some(p) => p,
                None => {
                    seen.push(c.clone());
                    seen.len() - 1
                }
            })
            .collect();
        Self {
            labels,
            k: seen.len().max(1),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of cases per label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Number of labels with at least one case.
    pub fn occupied(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Re-declares the assignment with a larger label space.
    pub fn widen(&self, k: usize) -> Result<Self> {
        Self::new(self.labels.clone(), k.max(self.k))
    }
}

/// N×K vote counts, accumulated one round at a time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    counts: Vec<u32>,
    n: usize,
    k: usize,
    total_resamples: u32,
}

impl VoteMatrix {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            counts: vec![0; n * k],
            n,
            k,
            total_resamples: 0,
        }
    }

    /// Builds a matrix from explicit rows; `total_resamples` is set to the
    /// largest row sum.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(Error::KTooSmall(0));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: k,
            });
        }
        let total = rows.iter().map(|r| r.iter().sum::<u32>()).max().unwrap_or(0);
        Ok(Self {
            counts: rows.concat(),
            n: rows.len(),
            k,
            total_resamples: total,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total_resamples(&self) -> u32 {
        self.total_resamples
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.k..(i + 1) * self.k]
    }

    pub fn row_sum(&self, i: usize) -> u32 {
        self.row(i).iter().sum()
    }

    /// Adds one vote per case for the label given in `assignment`.
    pub fn vote(&mut self, assignment: &CrispAssignment) -> Result<()> {
        if assignment.len() != self.n {
            return Err(Error::LengthMismatch {
                left: assignment.len(),
                right: self.n,
            });
        }
        if assignment.k() > self.k {
            return Err(Error::InvalidData(format!(
                "assignment declares k = {} but matrix has {} columns",
                assignment.k(),
                self.k
            )));
        }
        for (i, &l) in assignment.labels().iter().enumerate() {
            self.counts[i * self.k + l] += 1;
        }
        self.total_resamples += 1;
        Ok(())
    }

    /// Votes only for the listed cases (batched aggregation).
    pub fn vote_cases(&mut self, cases: &[usize], labels: &[usize]) -> Result<()> {
        if cases.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: cases.len(),
                right: labels.len(),
            });
        }
        for (&i, &l) in cases.iter().zip(labels) {
            if i >= self.n || l >= self.k {
                return Err(Error::InvalidData(format!(
                    "vote ({i}, {l}) outside a {}x{} matrix",
                    self.n, self.k
                )));
            }
            self.counts[i * self.k + l] += 1;
        }
        self.total_resamples += 1;
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_header(&mut w, self.k)?;
        for i in 0..self.n {
            write!(w, "{}", i + 1)?;
            for c in self.row(i) {
                write!(w, "\t{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<&[u32]> = (0..self.n).map(|i| self.row(i)).collect();
        serde_json::json!({ "total_resamples": self.total_resamples, "counts": rows })
    }
}

fn write_header<W: Write>(w: &mut W, k: usize) -> std::io::Result<()> {
    write!(w, "case")?;
    for j in 1..=k {
        write!(w, "\tk{j}")?;
    }
    writeln!(w)
}

/// Row-stochastic N×K matrix of estimated cluster membership probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    probs: Vec<f64>,
    n: usize,
    k: usize,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl ProbabilityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 || rows.is_empty() {
            return Err(Error::NotADistribution("empty matrix".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: k,
                });
            }
            if r.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::NotADistribution(format!("row {i} leaves [0, 1]")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL * k as f64 {
                return Err(Error::NotADistribution(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            probs: rows.concat(),
            n: rows.len(),
            k,
        })
    }

    /// The crisp matrix with a single 1 per row.
    pub fn crisp(assignment: &CrispAssignment) -> Self {
        let (n, k) = (assignment.len(), assignment.k());
        let mut probs = vec![0.0; n * k];
        for (i, &l) in assignment.labels().iter().enumerate() {
            probs[i * k + l] = 1.0;
        }
        Self { probs, n, k }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.probs[i * self.k + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.k)
    }

    /// Row argmax, ties to the lowest column.
    pub fn argmax_labels(&self) -> CrispAssignment {
        let labels = self.rows().map(argmax_lowest).collect();
        CrispAssignment { labels, k: self.k }
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_header(&mut w, self.k)?;
        for (i, r) in self.rows().enumerate() {
            write!(w, "{}", i + 1)?;
            for p in r {
                write!(w, "\t{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<&[f64]> = self.rows().collect();
        serde_json::json!(rows)
    }
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Per-model summary reported by a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub k: usize,
    pub information: f64,
    pub uncertainty: f64,
    pub cic: f64,
    pub rmc: f64,
    pub cluster_probs: Vec<f64>,
    pub gsd: Vec<f64>,
    /// Row sums of the cell-wise CIC matrix.
    pub cellwise_row_sums: Vec<f64>,
    pub degenerate_fraction: f64,
}

/// Divides each row of the vote matrix by its row sum.
pub fn normalize_votes(votes: &VoteMatrix) -> Result<ProbabilityMatrix> {
    let (n, k) = (votes.n(), votes.k());
    let mut probs = Vec::with_capacity(n * k);
    for i in 0..n {
        let row = votes.row(i);
        let sum: u32 = row.iter().sum();
        if sum == 0 {
            return Err(Error::ZeroRowSum(i));
        }
        let sum = f64::from(sum);
        probs.extend(row.iter().map(|&c| f64::from(c) / sum));
    }
    Ok(ProbabilityMatrix { probs, n, k })
}

/// Row-wise majority vote; ties are broken uniformly at random.
pub fn majority_estimate<R: Rng + ?Sized>(votes: &VoteMatrix, rng: &mut R) -> Result<CrispAssignment> {
    let rows: Vec<usize> = (0..votes.n()).collect();
    let labels = majority_of_rows(votes, &rows, rng)?;
    Ok(CrispAssignment { labels, k: votes.k() })
}

/// Majority labels of the given rows, in the given order, with the same
/// random tie-breaking as [`majority_estimate`].
pub fn majority_of_rows<R: Rng + ?Sized>(votes: &VoteMatrix, rows: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let mut labels = Vec::with_capacity(rows.len());
    let mut tied = Vec::with_capacity(votes.k());
    for &i in rows {
        let row = votes.row(i);
        let max = *row.iter().max().unwrap_or(&0);
        if max == 0 {
            return Err(Error::ZeroRowSum(i));
        }
        tied.clear();
        tied.extend(row.iter().enumerate().filter(|(_, &c)| c == max).map(|(j, _)| j));
        let pick = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        };
        labels.push(pick);
    }
    Ok(labels)
}
