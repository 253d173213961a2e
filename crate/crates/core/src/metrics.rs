//! Agreement indices and simulation studies.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselearn::{BaseClusterer, BaseKind, FittedBaseModel, Predictor, PredictorKind, Representatives};
use crate::error::{Error, Result};
use crate::matching::{contingency_unchecked, min_cost_permutation, Permutation};
use crate::mmcc::{round_solution, MmccConfig};
use crate::par::{map_range, Execution};
use crate::rng::{derive_seed, stream_rng, tag};
use crate::sweep::{run_sweep_with, select_k, SweepConfig};
use crate::types::{sq_dist, CrispAssignment, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub fraction_matched: f64,
    pub kappa: f64,
    pub rand: f64,
    pub crand: f64,
}

fn pairs(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// `(rand, crand)` from a contingency table.
fn pair_indices(counts: &[u64], rows: &[u64], cols: &[u64], n: u64) -> (f64, f64) {
    let total = pairs(n);
    if total == 0.0 {
        return (1.0, 1.0);
    }
    let within: f64 = counts.iter().map(|&c| pairs(c)).sum();
    let a: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let b: f64 = cols.iter().map(|&c| pairs(c)).sum();
    let rand = (total + 2.0 * within - a - b) / total;
    let expected = a * b / total;
    let max = 0.5 * (a + b);
    let crand = if max == expected {
        1.0
    } else {
        (within - expected) / (max - expected)
    };
    (rand, crand)
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Rand index and its Hubert–Arabie adjusted form. Label-free.
pub fn rand_indices(a: &CrispAssignment, b: &CrispAssignment) -> Result<(f64, f64)> {
    check_lengths(a.labels(), b.labels())?;
    let k = a.k().max(b.k());
    let table = contingency_unchecked(a.labels(), b.labels(), k);
    Ok(pair_indices(
        table.counts(),
        &table.row_sums(),
        &table.col_sums(),
        a.len() as u64,
    ))
}

/// All four indices. Fraction matched and kappa are computed after aligning
/// `a` to `b`, with both padded to the larger cluster count. Among alignments
/// with the largest matched mass, the one with the highest kappa is used, so
/// neither value depends on how the clusters are numbered.
pub fn agreement(a: &CrispAssignment, b: &CrispAssignment) -> Result<AgreementReport> {
    let perm = agreement_alignment(a, b)?;
    let k = perm.len();
    let aligned: Vec<usize> = a.labels().iter().map(|&l| perm.as_slice()[l]).collect();
    let table = contingency_unchecked(&aligned, b.labels(), k);
    let n = a.len() as f64;
    let (rows, cols) = (table.row_sums(), table.col_sums());
    let observed = (0..k).map(|j| table.get(j, j)).sum::<u64>() as f64 / n;
    let expected = rows.iter().zip(&cols).map(|(&r, &c)| r as f64 * c as f64).sum::<f64>() / (n * n);
    let kappa = if expected == 1.0 {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    let (rand, crand) = pair_indices(table.counts(), &rows, &cols, a.len() as u64);
    Ok(AgreementReport {
        fraction_matched: observed,
        kappa,
        rand,
        crand,
    })
}

/// Relabeling of `a` used by [`agreement`]: largest matched mass with `b`,
/// then the smallest chance agreement. Covers `max(a.k, b.k)` labels.
pub fn agreement_alignment(a: &CrispAssignment, b: &CrispAssignment) -> Result<Permutation> {
    check_lengths(a.labels(), b.labels())?;
    let k = a.k().max(b.k());
    let raw = contingency_unchecked(a.labels(), b.labels(), k);
    let (ra, cb) = (raw.row_sums(), raw.col_sums());
    // matched mass first; then the smallest chance agreement, which maximizes kappa
    let scale = (a.len() as i128).pow(2) + 1;
    let mut cost = vec![0i128; k * k];
    for x in 0..k {
        for y in 0..k {
            cost[x * k + y] = ra[x] as i128 * cb[y] as i128 - raw.get(x, y) as i128 * scale;
        }
    }
    Ok(min_cost_permutation(&cost, k))
}

/// Per case, whether `a` names the class of `truth` after alignment.
pub fn matched_cases(a: &CrispAssignment, truth: &CrispAssignment) -> Result<Vec<bool>> {
    let perm = agreement_alignment(a, truth)?;
    Ok(a.labels()
        .iter()
        .zip(truth.labels())
        .map(|(&l, &t)| perm.as_slice()[l] == t)
        .collect())
}

/// Cross-classification of two methods' failures against true classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FailureCode {
    /// Both methods assign the true class.
    BothOk,
    /// Only the first method fails.
    FirstFails,
    /// Only the second method fails.
    SecondFails,
    BothFail,
}

impl FailureCode {
    /// `o`, `s`, `t` or `x`.
    pub fn symbol(self) -> char {
        match self {
            FailureCode::BothOk => 'o',
            FailureCode::FirstFails => 's',
            FailureCode::SecondFails => 't',
            FailureCode::BothFail => 'x',
        }
    }
}

pub fn failure_codes(
    first: &CrispAssignment,
    second: &CrispAssignment,
    truth: &CrispAssignment,
) -> Result<Vec<FailureCode>> {
    let a = matched_cases(first, truth)?;
    let b = matched_cases(second, truth)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(&a, &b)| match (a, b) {
            (true, true) => FailureCode::BothOk,
            (false, true) => FailureCode::FirstFails,
            (true, false) => FailureCode::SecondFails,
            (false, false) => FailureCode::BothFail,
        })
        .collect())
}

/// Mean silhouette width over all cases, Euclidean distance. Cases in
/// singleton clusters score 0; a single occupied cluster gives 0.
pub fn silhouette(data: &Dataset, labels: &[usize]) -> f64 {
    let n = data.n_rows();
    assert_eq!(labels.len(), n);
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let widths = map_range(Execution::Parallel, 0, n, |i| {
        let own = labels[i];
        if sizes[own] == 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        let x = data.row(i);
        for j in 0..n {
            sums[labels[j]] += sq_dist(x, data.row(j)).sqrt();
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m == 0.0 {
            0.0
        } else {
            (b - a) / m
        }
    });
    widths.iter().sum::<f64>() / n as f64
}

/// Labels `points` with a model fitted on rows of `fit_data`.
pub fn predict_points(
    model: &FittedBaseModel,
    kind: PredictorKind,
    fit_data: &Dataset,
    points: &Dataset,
) -> CrispAssignment {
    let reps: Vec<&[f64]>;
    let (refs, labels): (Vec<&[f64]>, Vec<usize>) = match (&model.representatives, kind) {
        (Representatives::Centers { coords, n_cols }, PredictorKind::NearestRepresentative) => {
            reps = coords.chunks_exact(*n_cols).collect();
            (reps, (0..coords.len() / n_cols).collect())
        }
        (Representatives::Medoids { rows }, PredictorKind::NearestRepresentative) => (
            rows.iter().map(|&r| fit_data.row(r)).collect(),
            (0..rows.len()).collect(),
        ),
        (Representatives::Points { rows, labels }, _) => {
            (rows.iter().map(|&r| fit_data.row(r)).collect(), labels.clone())
        }
        (_, PredictorKind::NearestNeighbor) => (
            model.rows.iter().map(|&r| fit_data.row(r)).collect(),
            model.assignment.labels().to_vec(),
        ),
    };
    let out = points
        .rows()
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (j, r) in refs.iter().enumerate() {
                let d = sq_dist(x, r);
                if d < best.1 {
                    best = (j, d);
                }
            }
            labels[best.0]
        })
        .collect();
    CrispAssignment::new(out, model.assignment.k()).expect("labels below k")
}

/// Multivariate normal with the mean and covariance of a dataset.
#[derive(Debug, Clone)]
pub struct GaussianReference {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianReference {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let (n, m) = (data.n_rows(), data.n_cols());
        let x = DMatrix::from_row_slice(n, m, data.values());
        let mean = DVector::from_iterator(m, (0..m).map(|j| x.column(j).mean()));
        let mut centered = x.clone();
        for j in 0..m {
            centered.column_mut(j).add_scalar_mut(-mean[j]);
        }
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        Self::from_moments(mean, cov)
    }

    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        let factor = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => (cov + DMatrix::identity(m, m) * 1e-10)
                .cholesky()
                .ok_or(Error::DegenerateCovariance)?
                .l(),
        };
        Ok(Self { mean, factor })
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Dataset {
        let m = self.mean.len();
        let mut values = Vec::with_capacity(n * m);
        for _ in 0..n {
            let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
            values.extend((&self.mean + &self.factor * z).iter());
        }
        Dataset::new(values, n, m).expect("finite draws")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullSimConfig {
    /// Successive samples; yields `draws - 1` pairs.
    pub draws: usize,
    /// Sample size per draw, also the size of each evaluation grid.
    pub n: usize,
    pub k: usize,
    pub base: BaseKind,
    pub predictor: PredictorKind,
    pub seed: u64,
    pub execution: Execution,
}

/// Rand agreement between models fitted to successive independent samples
/// from a Gaussian with the data's mean and covariance. Both models of a pair
/// label a fresh grid of `n` draws, on which they are compared.
pub fn simulate_null_agreement(data: &Dataset, cfg: &NullSimConfig) -> Result<Vec<f64>> {
    if cfg.draws < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 draws, got {}",
            cfg.draws
        )));
    }
    if cfg.k < 1 || cfg.n < 2 {
        return Err(Error::InvalidConfig("need k >= 1 and n >= 2".into()));
    }
    let reference = GaussianReference::fit(data)?;
    let models = map_range(cfg.execution, 0, cfg.draws, |t| {
        let sample = reference.sample(cfg.n, &mut stream_rng(cfg.seed, &[tag::NULL_SAMPLE, t as u64]));
        let rows: Vec<usize> = (0..cfg.n).collect();
        let model = cfg.base.fit(
            &sample,
            &rows,
            cfg.k,
            &mut stream_rng(cfg.seed, &[tag::FIT, cfg.k as u64, t as u64]),
        );
        (sample, model)
    });
    let values = map_range(cfg.execution, 0, cfg.draws - 1, |t| {
        let grid = reference.sample(cfg.n, &mut stream_rng(cfg.seed, &[tag::NULL_GRID, t as u64]));
        let (sa, ma) = &models[t];
        let (sb, mb) = &models[t + 1];
        let a = predict_points(ma, cfg.predictor, sa, &grid);
        let b = predict_points(mb, cfg.predictor, sb, &grid);
        rand_indices(&a, &b).map(|r| r.0)
    });
    values.into_iter().collect()
}

fn round_solutions(data: &Dataset, cfg: &MmccConfig, rounds: usize) -> Vec<CrispAssignment> {
    let predictor = Predictor::new(cfg.predictor, data);
    map_range(cfg.execution, 0, rounds, |r| {
        round_solution(data, cfg, &cfg.base, &predictor, r)
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Rand agreement between full-sample extensions of successive resample fits.
/// Rounds whose fits stay degenerate are dropped before pairing.
pub fn resample_pair_agreement(data: &Dataset, cfg: &MmccConfig, rounds: usize) -> Result<Vec<f64>> {
    let solutions = round_solutions(data, cfg, rounds);
    solutions
        .windows(2)
        .map(|w| rand_indices(&w[0], &w[1]).map(|r| r.0))
        .collect()
}

/// Rand agreement between each resample solution and a fixed reference.
pub fn reference_agreement(
    data: &Dataset,
    cfg: &MmccConfig,
    reference: &CrispAssignment,
    rounds: usize,
) -> Result<Vec<f64>> {
    if reference.len() != data.n_rows() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: data.n_rows(),
        });
    }
    round_solutions(data, cfg, rounds)
        .iter()
        .map(|s| rand_indices(s, reference).map(|r| r.0))
        .collect()
}

/// Per round and per candidate `K`, the fraction of repetitions whose running
/// CIC argmax is that `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub ks: Vec<usize>,
    /// `fractions[round][j]` for `ks[j]`.
    pub fractions: Vec<Vec<f64>>,
    /// Final selection of each repetition.
    pub selected: Vec<Option<usize>>,
}

impl ConvergenceStudy {
    pub fn fraction(&self, round: usize, k: usize) -> Option<f64> {
        let j = self.ks.iter().position(|&x| x == k)?;
        self.fractions.get(round).map(|r| r[j])
    }

    /// Columns `round` then one per `K`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "round")?;
        for k in &self.ks {
            write!(w, "\tk{k}")?;
        }
        writeln!(w)?;
        for (r, row) in self.fractions.iter().enumerate() {
            write!(w, "{}", r + 1)?;
            for v in row {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Reruns the sweep `repetitions` times with derived seeds and tracks which
/// `K` leads the CIC after every round. Models flagged degenerate at the end
/// of a repetition never lead. With a single candidate it leads throughout.
pub fn convergence_study(data: &Dataset, cfg: &SweepConfig, repetitions: usize) -> Result<ConvergenceStudy> {
    if repetitions < 1 {
        return Err(Error::InvalidConfig("need at least one repetition".into()));
    }
    let ks: Vec<usize> = cfg.ks().collect();
    let rounds = cfg.template.resamples;
    let predictor = Predictor::new(cfg.template.predictor, data);
    let mut counts = vec![vec![0usize; ks.len()]; rounds];
    let mut selected = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut rep_cfg = cfg.clone();
        rep_cfg.silhouette = false;
        rep_cfg.template.seed = derive_seed(cfg.template.seed, &[tag::REPETITION, rep as u64]);
        let report = run_sweep_with(data, &rep_cfg, &cfg.template.base, &predictor)?;
        for (r, row) in counts.iter_mut().enumerate() {
            let leader = if ks.len() == 1 {
                Some(ks[0])
            } else {
                select_k(report.models.iter().map(|m| {
                    let value = match &m.mmcc {
                        Some(res) => res.cic_trace.get(r).copied().unwrap_or(f64::NAN),
                        None => m.breakdown.cic,
                    };
                    (m.k, value, m.degenerate)
                }))
            };
            if let Some(k) = leader {
                row[ks.iter().position(|&x| x == k).expect("k in range")] += 1;
            }
        }
        selected.push(report.selected_k);
    }
    let fractions = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / repetitions as f64).collect())
        .collect();
    Ok(ConvergenceStudy {
        ks,
        fractions,
        selected,
    })
}

/// Five-number summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<DistributionSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(DistributionSummary {
        count: v.len(),
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

pub fn median(values: &[f64]) -> f64 {
    summarize(values).map_or(f64::NAN, |s| s.median)
}

/// One value per line under a `value` header.
pub fn write_distribution_tsv<W: Write>(values: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "value")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}
