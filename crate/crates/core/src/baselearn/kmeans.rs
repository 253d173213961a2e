use rand::seq::index::sample;

use super::{BaseKind, DistinctPoints, FittedBaseModel, Representatives};
use crate::rng::SimRng;
use crate::types::{sq_dist, CrispAssignment, Dataset};

pub(crate) const MAX_ITER: usize = 300;
pub(crate) const REL_TOL: f64 = 1e-8;

pub(crate) struct Lloyd {
    pub centers: Vec<f64>,
    pub labels: Vec<usize>,
    /// Weighted within-cluster sum of squares after each assignment step.
    pub wcss_trace: Vec<f64>,
}

fn nearest(point: &[f64], centers: &[f64], m: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(m).enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Weighted Lloyd iteration from the given initial centers.
///
/// A cluster that loses all its points is moved onto the point farthest from
/// its own center, which keeps the objective non-increasing.
pub(crate) fn lloyd(points: &[&[f64]], weights: &[f64], mut centers: Vec<f64>, m: usize) -> Lloyd {
    let k = centers.len() / m;
    let mut labels = vec![0; points.len()];
    let mut dists = vec![0.0; points.len()];
    let mut wcss_trace = Vec::new();

    for _ in 0..MAX_ITER {
        let mut wcss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers, m);
            labels[i] = c;
            dists[i] = d;
            wcss += weights[i] * d;
        }
        wcss_trace.push(wcss);

        let mut sums = vec![0.0; k * m];
        let mut mass = vec![0.0; k];
        for (i, p) in points.iter().enumerate() {
            let l = labels[i];
            mass[l] += weights[i];
            for (s, x) in sums[l * m..(l + 1) * m].iter_mut().zip(p.iter()) {
                *s += weights[i] * x;
            }
        }
        let mut new_centers = centers.clone();
        for c in 0..k {
            if mass[c] > 0.0 {
                for j in 0..m {
                    new_centers[c * m + j] = sums[c * m + j] / mass[c];
                }
            }
        }
        for c in (0..k).filter(|&c| mass[c] == 0.0) {
            let far = (0..points.len())
                .filter(|&i| dists[i] > 0.0)
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                new_centers[c * m..(c + 1) * m].copy_from_slice(points[i]);
                dists[i] = 0.0;
                labels[i] = c;
            }
        }

        let moved: f64 = sq_dist(&new_centers, &centers);
        let scale: f64 = centers.iter().map(|x| x * x).sum();
        centers = new_centers;
        if moved.sqrt() <= REL_TOL * scale.sqrt().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest(p, &centers, m).0;
    }
    Lloyd {
        centers,
        labels,
        wcss_trace,
    }
}

/// k-means on a resample, seeded from `k` distinct data points.
///
/// Fewer than `k` distinct points yields one cluster per point and a
/// degenerate flag.
pub fn fit_kmeans(data: &Dataset, rows: &[usize], k: usize, rng: &mut SimRng) -> FittedBaseModel {
    assert!(k >= 1, "k must be positive");
    let m = data.n_cols();
    let distinct = DistinctPoints::new(data, rows);
    let points: Vec<&[f64]> = distinct.rows.iter().map(|&r| data.row(r)).collect();

    if distinct.len() <= k {
        let labels: Vec<usize> = (0..distinct.len()).collect();
        let coords = points.concat();
        return FittedBaseModel {
            kind: BaseKind::KMeans,
            rows: rows.to_vec(),
            assignment: CrispAssignment::new(distinct.expand(&labels), k).expect("labels below k"),
            representatives: Representatives::Centers { coords, n_cols: m },
            degenerate: distinct.len() < k,
            objective: 0.0,
        };
    }

    let init: Vec<f64> = sample(rng, distinct.len(), k)
        .into_iter()
        .flat_map(|i| points[i].iter().copied())
        .collect();
    let fit = lloyd(&points, &distinct.weights, init, m);
    let assignment = CrispAssignment::new(distinct.expand(&fit.labels), k).expect("labels below k");
    let degenerate = assignment.occupied() < k;
    FittedBaseModel {
        kind: BaseKind::KMeans,
        rows: rows.to_vec(),
        assignment,
        representatives: Representatives::Centers {
            coords: fit.centers,
            n_cols: m,
        },
        degenerate,
        objective: *fit.wcss_trace.last().unwrap_or(&0.0),
    }
}
