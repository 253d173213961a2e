//! Multiple-match cluster-count aggregation.
//!
//! Every round draws a resample, fits the base algorithm, extends the fit to
//! the whole sample and votes the resulting labels into an `N × K` count
//! matrix. The first successful round votes as-is; later rounds are first
//! aligned to the current majority assignment. Normalized counts estimate the
//! membership probabilities.
//!
//! Rounds are pure functions of `(seed, round, attempt)`, so they can be
//! computed ahead in parallel. Matching and voting always run in ascending
//! round order on one thread, so results do not depend on the worker count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselearn::{
    draw_resample, BaseClusterer, BaseKind, FittedBaseModel, Predictor, PredictorKind, ResampleScheme,
};
use crate::cic::cic_value;
use crate::error::{Error, Result};
use crate::matching::{align_labels, MatcherKind};
use crate::par::{map_range, Execution};
use crate::rng::{stream_rng, tag};
use crate::types::{
    argmax_lowest, majority_estimate, majority_of_rows, normalize_votes, CrispAssignment, Dataset, ProbabilityMatrix,
    VoteMatrix,
};

/// Rounds computed ahead of the aggregator per parallel block.
const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Convergence {
    /// Always run all rounds.
    Fixed,
    /// Stop once the CIC trace is flat and the majority assignment has been
    /// stable over the last `window` rounds.
    EarlyStop { window: usize, epsilon: f64 },
}

impl Convergence {
    pub fn early_stop_default() -> Self {
        Convergence::EarlyStop {
            window: 100,
            epsilon: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmccConfig {
    pub k: usize,
    /// Total voting rounds `R`.
    pub resamples: usize,
    /// Resample size `n`. Defaults to `N` for the bootstrap and `N / 2` for
    /// subsampling.
    pub resample_size: Option<usize>,
    pub scheme: ResampleScheme,
    pub base: BaseKind,
    pub predictor: PredictorKind,
    pub matcher: MatcherKind,
    pub seed: u64,
    /// Fresh attempts for a round whose fit is degenerate before it is skipped.
    pub degenerate_retry_limit: usize,
    pub convergence: Convergence,
    #[serde(skip)]
    pub execution: Execution,
}

impl MmccConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            resamples: 1000,
            resample_size: None,
            scheme: ResampleScheme::Bootstrap,
            base: BaseKind::Pam,
            predictor: PredictorKind::NearestRepresentative,
            matcher: MatcherKind::Exact,
            seed: 0,
            degenerate_retry_limit: 3,
            convergence: Convergence::Fixed,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::KTooSmall(self.k));
        }
        if self.resamples < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 resamples, got {}",
                self.resamples
            )));
        }
        if self.resample_size == Some(0) {
            return Err(Error::InvalidConfig("resample size must be positive".into()));
        }
        if let Convergence::EarlyStop { window, epsilon } = self.convergence {
            if window == 0 || epsilon.is_nan() || epsilon <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "early stop needs a positive window and epsilon, got {window} and {epsilon}"
                )));
            }
        }
        Ok(())
    }

    /// Resample size for a pool of `pool` cases.
    pub fn size_for(&self, pool: usize) -> usize {
        self.resample_size.unwrap_or(match self.scheme {
            ResampleScheme::Bootstrap => pool,
            ResampleScheme::Subsample => (pool / 2).max(1),
        })
    }
}

#[derive(Debug, Clone)]
pub struct MmccResult {
    pub k: usize,
    pub votes: VoteMatrix,
    pub probs: ProbabilityMatrix,
    /// Rounds skipped because every attempt was degenerate.
    pub degenerate_rounds: usize,
    /// Rounds attempted, voting or skipped.
    pub rounds_used: usize,
    /// CIC of the running probability estimate after each attempted round.
    /// Skipped rounds repeat the previous value; rounds before the first vote
    /// are NaN.
    pub cic_trace: Vec<f64>,
    /// Majority assignment of the final vote matrix.
    pub majority: CrispAssignment,
}

impl MmccResult {
    pub fn voting_rounds(&self) -> usize {
        self.rounds_used - self.degenerate_rounds
    }

    pub fn degenerate_fraction(&self) -> f64 {
        self.degenerate_rounds as f64 / self.rounds_used.max(1) as f64
    }

    /// Two columns: 1-based round and CIC.
    pub fn write_trace_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "round\tcic")?;
        for (r, c) in self.cic_trace.iter().enumerate() {
            writeln!(w, "{}\t{}", r + 1, c)?;
        }
        Ok(())
    }
}

/// Index sets for the batched path.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLayout {
    pub batches: Vec<Vec<usize>>,
    /// Consecutive batches must share at least this fraction of the smaller one.
    pub overlap_fraction: f64,
}

impl BatchLayout {
    pub fn new(batches: Vec<Vec<usize>>) -> Self {
        Self {
            batches,
            overlap_fraction: 0.5,
        }
    }

    /// `count` contiguous windows over `0..n`, each overlapping its successor
    /// by `overlap_fraction` of its length.
    pub fn sliding(n: usize, count: usize, overlap_fraction: f64) -> Self {
        assert!(count >= 1 && (0.0..1.0).contains(&overlap_fraction));
        // count·len - (count-1)·overlap·len = n
        let len = (n as f64 / (count as f64 - (count as f64 - 1.0) * overlap_fraction)).ceil() as usize;
        let step = ((len as f64) * (1.0 - overlap_fraction)).floor().max(1.0) as usize;
        let batches = (0..count)
            .map(|b| {
                let start = (b * step).min(n.saturating_sub(len));
                let end = if b + 1 == count { n } else { (start + len).min(n) };
                (start..end).collect()
            })
            .collect();
        Self {
            batches,
            overlap_fraction,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batches.is_empty() || self.batches.iter().any(|b| b.is_empty()) {
            return Err(Error::InvalidConfig("batches must be non-empty".into()));
        }
        let mut covered = vec![false; n];
        for b in &self.batches {
            for &i in b {
                if i >= n {
                    return Err(Error::InvalidConfig(format!("batch case {i} outside 0..{n}")));
                }
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|&c| !c) {
            return Err(Error::UncoveredCase(i));
        }
        for (b, pair) in self.batches.windows(2).enumerate() {
            let mut in_first = vec![false; n];
            pair[0].iter().for_each(|&i| in_first[i] = true);
            let shared = pair[1].iter().filter(|&&i| in_first[i]).count();
            let smaller = pair[0].len().min(pair[1].len());
            if (shared as f64) < self.overlap_fraction * smaller as f64 {
                return Err(Error::InvalidConfig(format!(
                    "batches {b} and {} share {shared} cases, fewer than {} of {smaller}",
                    b + 1,
                    self.overlap_fraction
                )));
            }
        }
        Ok(())
    }
}

/// True when the last `window` trace values span less than `epsilon` and the
/// majority assignment has not changed for at least `window` rounds.
pub fn check_convergence(trace: &[f64], window: usize, epsilon: f64, majority_unchanged_for: usize) -> bool {
    if window == 0 || trace.len() < window || majority_unchanged_for < window {
        return false;
    }
    let tail = &trace[trace.len() - window..];
    if tail.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo < epsilon
}

/// Aggregates `cfg.resamples` rounds of the configured base learner.
pub fn mmcc_fit(data: &Dataset, cfg: &MmccConfig) -> Result<MmccResult> {
    let predictor = Predictor::new(cfg.predictor, data);
    mmcc_fit_with(data, cfg, &cfg.base, &predictor)
}

/// [`mmcc_fit`] with an explicit base learner and a prebuilt predictor, which
/// can then be shared across cluster counts.
pub fn mmcc_fit_with(
    data: &Dataset,
    cfg: &MmccConfig,
    base: &dyn BaseClusterer,
    predictor: &Predictor,
) -> Result<MmccResult> {
    cfg.validate()?;
    let all: Vec<usize> = (0..data.n_rows()).collect();
    aggregate(data, cfg, base, predictor, std::slice::from_ref(&all))
}

/// Batched aggregation: round `r` resamples within batch `r mod B` and votes
/// only for that batch's cases. Each batch is aligned to the majority of its
/// cases that already carry votes, which for a new batch are exactly the
/// cases it shares with earlier ones.
pub fn mmcc_fit_batched(data: &Dataset, cfg: &MmccConfig, layout: &BatchLayout) -> Result<MmccResult> {
    cfg.validate()?;
    layout.validate(data.n_rows())?;
    let predictor = Predictor::new(cfg.predictor, data);
    aggregate(data, cfg, &cfg.base, &predictor, &layout.batches)
}

/// Full-length solution of a single round, as voted before alignment, or
/// `None` if every attempt was degenerate.
pub fn round_solution(
    data: &Dataset,
    cfg: &MmccConfig,
    base: &dyn BaseClusterer,
    predictor: &Predictor,
    round: usize,
) -> Option<CrispAssignment> {
    let all: Vec<usize> = (0..data.n_rows()).collect();
    draw_round(data, cfg, base, predictor, &all, round)
        .map(|labels| CrispAssignment::new(labels, cfg.k).expect("labels below k"))
}

/// Labels for `cases` from one round, or `None` if every attempt was degenerate.
fn draw_round(
    data: &Dataset,
    cfg: &MmccConfig,
    base: &dyn BaseClusterer,
    predictor: &Predictor,
    cases: &[usize],
    round: usize,
) -> Option<Vec<usize>> {
    let size = cfg.size_for(cases.len());
    for attempt in 0..=cfg.degenerate_retry_limit {
        let (r, a) = (round as u64, attempt as u64);
        let mut rng = stream_rng(cfg.seed, &[tag::RESAMPLE, r, a]);
        let positions = draw_resample(cases.len(), size, cfg.scheme, &mut rng);
        let rows: Vec<usize> = positions.indices.iter().map(|&p| cases[p]).collect();
        let mut rng = stream_rng(cfg.seed, &[tag::FIT, cfg.k as u64, r, a]);
        let model = base.fit(data, &rows, cfg.k, &mut rng);
        if !model.degenerate {
            return Some(complete_on(predictor, &model, data, cases));
        }
    }
    None
}

fn complete_on(predictor: &Predictor, model: &FittedBaseModel, data: &Dataset, cases: &[usize]) -> Vec<usize> {
    if cases.len() == data.n_rows() && cases.iter().enumerate().all(|(p, &i)| p == i) {
        return predictor.complete(model, data).labels().to_vec();
    }
    let mut fitted = vec![usize::MAX; data.n_rows()];
    for (&r, &l) in model.rows.iter().zip(model.assignment.labels()) {
        fitted[r] = l;
    }
    let missing: Vec<usize> = cases.iter().copied().filter(|&i| fitted[i] == usize::MAX).collect();
    if !missing.is_empty() {
        let predicted = predictor.predict(model, data, &missing);
        for (&i, &l) in missing.iter().zip(predicted.labels()) {
            fitted[i] = l;
        }
    }
    cases.iter().map(|&i| fitted[i]).collect()
}

/// Probabilities over the rows that carry votes.
fn voted_probs(votes: &VoteMatrix) -> Option<ProbabilityMatrix> {
    let rows: Vec<Vec<f64>> = (0..votes.n())
        .filter_map(|i| {
            let s = votes.row_sum(i);
            (s > 0).then(|| votes.row(i).iter().map(|&c| f64::from(c) / f64::from(s)).collect())
        })
        .collect();
    if rows.is_empty() {
        return None;
    }
    ProbabilityMatrix::from_rows(&rows).ok()
}

fn aggregate(
    data: &Dataset,
    cfg: &MmccConfig,
    base: &dyn BaseClusterer,
    predictor: &Predictor,
    batches: &[Vec<usize>],
) -> Result<MmccResult> {
    let (n, k, total) = (data.n_rows(), cfg.k, cfg.resamples);
    let mut votes = VoteMatrix::zeros(n, k);
    let mut rng = stream_rng(cfg.seed, &[tag::AGGREGATE, k as u64]);
    let mut trace = Vec::with_capacity(total);
    let mut degenerate_rounds = 0;
    let mut rounds_used = 0;
    let mut last_cic = f64::NAN;
    let mut leader = vec![usize::MAX; n];
    let mut stable_for = 0;

    let mut start = 0;
    'rounds: while start < total {
        let end = (start + BLOCK).min(total);
        let draws = map_range(cfg.execution, start, end, |round| {
            draw_round(data, cfg, base, predictor, &batches[round % batches.len()], round)
        });
        for (round, draw) in (start..end).zip(draws) {
            rounds_used += 1;
            let Some(labels) = draw else {
                degenerate_rounds += 1;
                trace.push(last_cic);
                stable_for += 1;
                continue;
            };
            let cases = &batches[round % batches.len()];
            let voted: Vec<usize> = (0..cases.len()).filter(|&p| votes.row_sum(cases[p]) > 0).collect();
            let aligned = if voted.is_empty() {
                labels
            } else {
                let reference_rows: Vec<usize> = voted.iter().map(|&p| cases[p]).collect();
                let reference = CrispAssignment::new(majority_of_rows(&votes, &reference_rows, &mut rng)?, k)?;
                let candidate = CrispAssignment::new(voted.iter().map(|&p| labels[p]).collect(), k)?;
                let perm = align_labels(cfg.matcher, &candidate, &reference)?;
                labels.iter().map(|&l| perm.as_slice()[l]).collect()
            };
            votes.vote_cases(cases, &aligned)?;

            let probs = voted_probs(&votes).expect("at least one row voted");
            last_cic = cic_value(&probs);
            trace.push(last_cic);

            // deterministic leader labels, so monitoring never touches the
            // aggregator stream
            let mut changed = false;
            for &i in cases {
                let top = argmax_lowest(&votes.row(i).iter().map(|&c| f64::from(c)).collect::<Vec<_>>());
                if leader[i] != top {
                    leader[i] = top;
                    changed = true;
                }
            }
            stable_for = if changed { 0 } else { stable_for + 1 };

            if let Convergence::EarlyStop { window, epsilon } = cfg.convergence {
                if check_convergence(&trace, window, epsilon, stable_for) {
                    break 'rounds;
                }
            }
        }
        start = end;
    }

    if degenerate_rounds == rounds_used {
        return Err(Error::AllRoundsDegenerate { k });
    }
    let probs = normalize_votes(&votes)?;
    let majority = majority_estimate(&votes, &mut rng)?;
    Ok(MmccResult {
        k,
        votes,
        probs,
        degenerate_rounds,
        rounds_used,
        cic_trace: trace,
        majority,
    })
}
