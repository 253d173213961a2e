//! Base cluster algorithms and out-of-resample prediction.
//!
//! Each fitter sees a resample (a multiset of row indices), collapses it to
//! distinct coordinates with multiplicity weights, and returns a crisp
//! solution over the resample positions. Predictors then extend that
//! solution to every case in the dataset.

mod kdtree;
mod kmeans;
mod pam;
mod predict;
mod resample;
mod slink;

pub use kdtree::NearestNeighborIndex;
pub use kmeans::fit_kmeans;
pub use pam::fit_pam;
pub use predict::{predict_1nn, predict_nearest_representative, Predictor, PredictorKind};
pub use resample::{draw_resample, ResampleIndices, ResampleScheme};
pub use slink::fit_single_link;

use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::types::{CrispAssignment, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    KMeans,
    Pam,
    SingleLink,
}

impl std::str::FromStr for BaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmeans" => Ok(BaseKind::KMeans),
            "pam" => Ok(BaseKind::Pam),
            "slink" | "singlelink" => Ok(BaseKind::SingleLink),
            _ => Err(format!("unknown base learner `{s}`")),
        }
    }
}

impl std::fmt::Display for BaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaseKind::KMeans => "kmeans",
            BaseKind::Pam => "pam",
            BaseKind::SingleLink => "slink",
        })
    }
}

/// What a fitted model keeps around for prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum Representatives {
    /// Cluster centers, row-major `k' × m`.
    Centers { coords: Vec<f64>, n_cols: usize },
    /// Medoids given as dataset rows, one per label.
    Medoids { rows: Vec<usize> },
    /// Labelled resample points (single-link keeps every distinct point).
    Points { rows: Vec<usize>, labels: Vec<usize> },
}

impl Representatives {
    pub fn len(&self) -> usize {
        match self {
            Representatives::Centers { coords, n_cols } => coords.len() / n_cols,
            Representatives::Medoids { rows } => rows.len(),
            Representatives::Points { rows, .. } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedBaseModel {
    pub kind: BaseKind,
    /// Resample rows, in draw order.
    pub rows: Vec<usize>,
    /// Labels for `rows`, declared with the requested `k`.
    pub assignment: CrispAssignment,
    pub representatives: Representatives,
    /// Fewer than `k` non-empty clusters.
    pub degenerate: bool,
    /// Final value of the learner's objective (WCSS, total dissimilarity, or
    /// the largest merge height kept inside clusters).
    pub objective: f64,
}

/// A base cluster algorithm: resample in, crisp `k`-cluster solution out.
pub trait BaseClusterer: Send + Sync {
    fn fit(&self, data: &Dataset, rows: &[usize], k: usize, rng: &mut SimRng) -> FittedBaseModel;
}

impl BaseClusterer for BaseKind {
    fn fit(&self, data: &Dataset, rows: &[usize], k: usize, rng: &mut SimRng) -> FittedBaseModel {
        match self {
            BaseKind::KMeans => fit_kmeans(data, rows, k, rng),
            BaseKind::Pam => fit_pam(data, rows, k, rng),
            BaseKind::SingleLink => fit_single_link(data, rows, k),
        }
    }
}

/// Distinct coordinates of a resample with multiplicities.
#[derive(Debug, Clone)]
pub(crate) struct DistinctPoints {
    /// First dataset row carrying each distinct coordinate, ascending.
    pub rows: Vec<usize>,
    pub weights: Vec<f64>,
    /// For every resample position, its distinct-point index.
    pub member_of: Vec<usize>,
}

impl DistinctPoints {
    pub fn new(data: &Dataset, rows: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let cmp_rows = |a: usize, b: usize| {
            data.row(a)
                .iter()
                .zip(data.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        };
        order.sort_by(|&a, &b| cmp_rows(rows[a], rows[b]).then(rows[a].cmp(&rows[b])));

        // group equal coordinates, remembering the smallest row in each group
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for &pos in &order {
            match groups.last_mut() {
                Some((first, members)) if cmp_rows(*first, rows[pos]).is_eq() => members.push(pos),
                _ => groups.push((rows[pos], vec![pos])),
            }
        }
        groups.sort_by_key(|(first, _)| *first);

        let mut member_of = vec![0; rows.len()];
        let mut out_rows = Vec::with_capacity(groups.len());
        let mut weights = Vec::with_capacity(groups.len());
        for (d, (first, members)) in groups.into_iter().enumerate() {
            out_rows.push(first);
            weights.push(members.len() as f64);
            for p in members {
                member_of[p] = d;
            }
        }
        Self {
            rows: out_rows,
            weights,
            member_of,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Full Euclidean distance matrix between distinct points.
    pub fn distances(&self, data: &Dataset) -> Vec<f64> {
        let n = self.len();
        let mut d = vec![0.0; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let v = crate::types::sq_dist(data.row(self.rows[a]), data.row(self.rows[b])).sqrt();
                d[a * n + b] = v;
                d[b * n + a] = v;
            }
        }
        d
    }

    /// Expands labels over distinct points back to resample positions.
    pub fn expand(&self, labels: &[usize]) -> Vec<usize> {
        self.member_of.iter().map(|&d| labels[d]).collect()
    }
}
