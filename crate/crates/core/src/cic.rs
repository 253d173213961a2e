//! Information-theoretic evaluation of a membership-probability matrix.
//!
//! All quantities are in bits and use `0 · log2(0) = 0`.
//!
//! * uncertainty: mean row entropy of the probability matrix
//! * information: mean row sum of `D[i,k] = -P[i,k] · log2(1 - |P[i,k] - p[k]|)`,
//!   scaled by `1 - RMC`, where `p` are the column means
//! * `RMC = (2^H(p) - 1) / (N - 1)`, the effective cluster count relative to
//!   the all-singletons extreme
//! * `CIC = information - uncertainty`, also the mean row sum of the cell-wise
//!   components

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{argmax_lowest, ProbabilityMatrix};

#[inline]
fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::NotADistribution("entries must lie in [0, 1]".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution(format!("sums to {s}")));
    }
    Ok(-p.iter().map(|&x| plogp(x)).sum::<f64>())
}

/// Sum over cases of `log2` of the largest row probability.
pub fn pseudo_log2_likelihood(probs: &ProbabilityMatrix) -> f64 {
    probs
        .rows()
        .map(|r| {
            let max = r[argmax_lowest(r)];
            if max > 0.0 {
                max.log2()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

pub fn model_uncertainty(probs: &ProbabilityMatrix) -> f64 {
    let total: f64 = probs.rows().map(|r| r.iter().map(|&p| plogp(p)).sum::<f64>()).sum();
    -total / probs.n() as f64
}

/// Column sums normalized to one.
pub fn cluster_probabilities(probs: &ProbabilityMatrix) -> Vec<f64> {
    let mut col = vec![0.0; probs.k()];
    for r in probs.rows() {
        for (c, &p) in col.iter_mut().zip(r) {
            *c += p;
        }
    }
    let total: f64 = col.iter().sum();
    col.iter().map(|c| c / total).collect()
}

/// `D[i,k] = -P[i,k] · log2(1 - |P[i,k] - p[k]|)`, zero wherever `P[i,k] = 0`.
pub fn weighted_log_deviation(probs: &ProbabilityMatrix, cluster_probs: &[f64]) -> Vec<f64> {
    let mut d = Vec::with_capacity(probs.n() * probs.k());
    for r in probs.rows() {
        for (&p, &pk) in r.iter().zip(cluster_probs) {
            if p == 0.0 {
                d.push(0.0);
                continue;
            }
            let arg = 1.0 - (p - pk).abs();
            // |p - pk| = 1 with p > 0 needs p = 1 and pk = 0, which the column
            // means rule out
            debug_assert!(arg > 0.0, "log argument vanished for p = {p}, pk = {pk}");
            d.push(-p * arg.log2());
        }
    }
    d
}

/// Relative model complexity, 0 for a single cluster and 1 when every case
/// forms its own cluster.
pub fn relative_model_complexity(cluster_probs: &[f64], n: usize) -> f64 {
    assert!(n >= 2, "need at least two cases");
    let h = -cluster_probs.iter().map(|&p| plogp(p)).sum::<f64>();
    ((h.exp2() - 1.0) / (n as f64 - 1.0)).clamp(0.0, 1.0)
}

/// Cell information `I = D · (1 - RMC)` and its mean row sum.
pub fn model_information(d: &[f64], rmc: f64, n: usize) -> (f64, Vec<f64>) {
    let i_matrix: Vec<f64> = d.iter().map(|&x| x * (1.0 - rmc)).collect();
    let information = i_matrix.iter().sum::<f64>() / n as f64;
    (information, i_matrix)
}

/// Per case: `2 · P_best / (P_best + P_second) - 1`.
pub fn gsd(probs: &ProbabilityMatrix) -> Result<Vec<f64>> {
    if probs.k() < 2 {
        return Err(Error::KTooSmall(probs.k()));
    }
    Ok(probs.rows().map(gsd_row).collect())
}

fn gsd_row(r: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in r {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    2.0 * first / (first + second) - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CicBreakdown {
    pub n: usize,
    pub k: usize,
    pub entropy_of_marginals: f64,
    pub cluster_probs: Vec<f64>,
    pub uncertainty: f64,
    pub rmc: f64,
    pub information: f64,
    pub cic: f64,
    /// Row-major `n × k`.
    #[serde(skip)]
    pub d_matrix: Vec<f64>,
    #[serde(skip)]
    pub i_matrix: Vec<f64>,
    #[serde(skip)]
    pub cellwise: Vec<f64>,
    pub gsd: Vec<f64>,
}

impl CicBreakdown {
    pub fn cellwise_row_sums(&self) -> Vec<f64> {
        self.cellwise.chunks_exact(self.k).map(|r| r.iter().sum()).collect()
    }
}

/// Full breakdown. A single cluster carries no information: everything is 0.
pub fn cic(probs: &ProbabilityMatrix) -> CicBreakdown {
    let (n, k) = (probs.n(), probs.k());
    if k == 1 {
        return CicBreakdown {
            n,
            k,
            entropy_of_marginals: 0.0,
            cluster_probs: vec![1.0],
            uncertainty: 0.0,
            rmc: 0.0,
            information: 0.0,
            cic: 0.0,
            d_matrix: vec![0.0; n],
            i_matrix: vec![0.0; n],
            cellwise: vec![0.0; n],
            gsd: vec![0.0; n],
        };
    }
    let cluster_probs = cluster_probabilities(probs);
    let entropy_of_marginals = -cluster_probs.iter().map(|&p| plogp(p)).sum::<f64>();
    let uncertainty = model_uncertainty(probs);
    let d_matrix = weighted_log_deviation(probs, &cluster_probs);
    let rmc = relative_model_complexity(&cluster_probs, n.max(2));
    let (information, i_matrix) = model_information(&d_matrix, rmc, n);
    let cellwise: Vec<f64> = probs
        .rows()
        .flat_map(|r| r.iter().copied())
        .zip(&i_matrix)
        .map(|(p, &i)| i + plogp(p))
        .collect();
    let gsd = probs.rows().map(gsd_row).collect();
    CicBreakdown {
        n,
        k,
        entropy_of_marginals,
        cluster_probs,
        uncertainty,
        rmc,
        information,
        cic: information - uncertainty,
        d_matrix,
        i_matrix,
        cellwise,
        gsd,
    }
}

/// CIC value only, without allocating the diagnostic matrices.
pub fn cic_value(probs: &ProbabilityMatrix) -> f64 {
    if probs.k() == 1 {
        return 0.0;
    }
    let cluster_probs = cluster_probabilities(probs);
    let rmc = relative_model_complexity(&cluster_probs, probs.n().max(2));
    let mut d_total = 0.0;
    for r in probs.rows() {
        for (&p, &pk) in r.iter().zip(&cluster_probs) {
            if p > 0.0 {
                d_total -= p * (1.0 - (p - pk).abs()).log2();
            }
        }
    }
    let n = probs.n() as f64;
    d_total * (1.0 - rmc) / n - model_uncertainty(probs)
}
