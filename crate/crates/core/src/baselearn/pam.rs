//! Partitioning around medoids with weighted BUILD and SWAP.
//!
//! Duplicate resample entries are collapsed into weighted distinct points, so
//! medoids are always distinct coordinates. SWAP evaluates every
//! (medoid, non-medoid) exchange per iteration using the nearest/second-nearest
//! decomposition and applies the single best one. Ties go to the lowest
//! candidate index, then the lowest medoid slot.

use super::{BaseKind, DistinctPoints, FittedBaseModel, Representatives};
use crate::rng::SimRng;
use crate::types::{CrispAssignment, Dataset};

pub(crate) struct PamOutcome {
    /// Medoids as distinct-point indices, in BUILD order.
    pub medoids: Vec<usize>,
    pub labels: Vec<usize>,
    pub objective: f64,
    /// Objective after BUILD and after every applied swap.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<f64>,
}

fn build(dist: &[f64], w: &[f64], n: usize, k: usize) -> Vec<usize> {
    let mut medoids = Vec::with_capacity(k);
    let first = (0..n)
        .map(|x| (x, (0..n).map(|j| w[j] * dist[j * n + x]).sum::<f64>()))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0;
    medoids.push(first);
    let mut near: Vec<f64> = (0..n).map(|j| dist[j * n + first]).collect();
    let mut is_medoid = vec![false; n];
    is_medoid[first] = true;
    while medoids.len() < k {
        let mut best = (usize::MAX, -1.0);
        for x in (0..n).filter(|&x| !is_medoid[x]) {
            let gain: f64 = (0..n).map(|j| w[j] * (near[j] - dist[j * n + x]).max(0.0)).sum();
            if gain > best.1 {
                best = (x, gain);
            }
        }
        let x = best.0;
        medoids.push(x);
        is_medoid[x] = true;
        for j in 0..n {
            near[j] = near[j].min(dist[j * n + x]);
        }
    }
    medoids
}

/// Nearest and second-nearest medoid slot for each point.
fn nearest_two(dist: &[f64], n: usize, medoids: &[usize]) -> Vec<(usize, f64, f64)> {
    (0..n)
        .map(|j| {
            let (mut s1, mut d1, mut d2) = (0, f64::INFINITY, f64::INFINITY);
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dist[j * n + m];
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    s1 = slot;
                } else if d < d2 {
                    d2 = d;
                }
            }
            (s1, d1, d2)
        })
        .collect()
}

fn objective(near: &[(usize, f64, f64)], w: &[f64]) -> f64 {
    near.iter().zip(w).map(|(t, wj)| wj * t.1).sum()
}

pub(crate) fn pam_weighted(dist: &[f64], w: &[f64], k: usize) -> PamOutcome {
    let n = w.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= distinct points");
    let mut medoids = build(dist, w, n, k);
    let mut near = nearest_two(dist, n, &medoids);
    let mut current = objective(&near, w);
    let mut trace = vec![current];
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }

    let total_weight: f64 = w.iter().sum();
    let scale = dist.iter().fold(0.0f64, |a, &b| a.max(b)) * total_weight;
    let threshold = -1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut delta = vec![0.0; k];
    // every applied swap strictly lowers the objective, so this only guards
    // against float cycling
    for _ in 0..(100 * n * k).max(1000) {
        let mut best = (0.0, usize::MAX, usize::MAX);
        for x in (0..n).filter(|&x| !is_medoid[x]) {
            delta.iter_mut().for_each(|d| *d = 0.0);
            let mut shared = 0.0;
            for j in 0..n {
                let (s1, d1, d2) = near[j];
                let dxj = dist[j * n + x];
                let gain_other = (dxj - d1).min(0.0);
                shared += w[j] * gain_other;
                delta[s1] += w[j] * (dxj.min(d2) - d1 - gain_other);
            }
            for (slot, d) in delta.iter().enumerate() {
                let total = shared + d;
                if total < best.0 {
                    best = (total, x, slot);
                }
            }
        }
        if best.1 == usize::MAX || best.0 >= threshold {
            break;
        }
        let (_, x, slot) = best;
        is_medoid[medoids[slot]] = false;
        is_medoid[x] = true;
        medoids[slot] = x;
        near = nearest_two(dist, n, &medoids);
        let next = objective(&near, w);
        debug_assert!(next <= current + 1e-9 * scale.max(1.0));
        current = next;
        trace.push(current);
    }
    let labels = near.iter().map(|t| t.0).collect();
    PamOutcome {
        medoids,
        labels,
        objective: current,
        trace,
    }
}

/// PAM on a resample under Euclidean dissimilarity.
///
/// More clusters than distinct points yields one cluster per point and a
/// degenerate flag. PAM is deterministic; the generator is unused.
pub fn fit_pam(data: &Dataset, rows: &[usize], k: usize, _rng: &mut SimRng) -> FittedBaseModel {
    assert!(k >= 1, "k must be positive");
    let distinct = DistinctPoints::new(data, rows);
    let kk = k.min(distinct.len());
    let dist = distinct.distances(data);
    let fit = pam_weighted(&dist, &distinct.weights, kk);
    let medoid_rows = fit.medoids.iter().map(|&d| distinct.rows[d]).collect();
    FittedBaseModel {
        kind: BaseKind::Pam,
        rows: rows.to_vec(),
        assignment: CrispAssignment::new(distinct.expand(&fit.labels), k).expect("labels below k"),
        representatives: Representatives::Medoids { rows: medoid_rows },
        degenerate: kk < k,
        objective: fit.objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_points(n: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let shift = if i % 2 == 0 { 0.0 } else { 6.0 };
                vec![
                    shift + rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        Dataset::from_rows(&rows).unwrap()
    }

    fn total_cost(dist: &[f64], n: usize, medoids: &[usize]) -> f64 {
        (0..n)
            .map(|j| medoids.iter().map(|&m| dist[j * n + m]).fold(f64::INFINITY, f64::min))
            .sum()
    }

    #[test]
    fn two_blobs_match_exhaustive_pair_search() {
        for seed in 0..10 {
            let n = 20 + seed as usize;
            let data = random_points(n, seed);
            let rows: Vec<usize> = (0..n).collect();
            let distinct = DistinctPoints::new(&data, &rows);
            let dist = distinct.distances(&data);
            let fit = pam_weighted(&dist, &distinct.weights, 2);
            let mut best = f64::INFINITY;
            for a in 0..n {
                for b in (a + 1)..n {
                    best = best.min(total_cost(&dist, n, &[a, b]));
                }
            }
            assert!((fit.objective - best).abs() < 1e-9, "{} vs {best}", fit.objective);
            // one medoid per blob
            let parity: Vec<usize> = fit.medoids.iter().map(|m| m % 2).collect();
            assert_ne!(parity[0], parity[1]);
        }
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let data = random_points(8, 1);
        let rows: Vec<usize> = (0..8).collect();
        let fit = fit_pam(&data, &rows, 8, &mut stream_rng(0, &[]));
        assert_eq!(fit.objective, 0.0);
        assert_eq!(fit.assignment.occupied(), 8);
        assert!(!fit.degenerate);
    }

    #[test]
    fn duplicates_yield_distinct_medoids() {
        let data = random_points(10, 2);
        let rows = vec![0, 0, 0, 1, 1, 2, 3, 3, 4];
        let fit = fit_pam(&data, &rows, 3, &mut stream_rng(0, &[]));
        let Representatives::Medoids { rows: med } = &fit.representatives else {
            panic!("expected medoids");
        };
        let mut m = med.clone();
        m.sort_unstable();
        m.dedup();
        assert_eq!(m.len(), 3);
        // duplicates share their label
        let l = fit.assignment.labels();
        assert!(l[0] == l[1] && l[1] == l[2] && l[3] == l[4] && l[6] == l[7]);
    }

    #[test]
    fn more_clusters_than_points_is_degenerate() {
        let data = random_points(10, 3);
        let fit = fit_pam(&data, &[1, 1, 4, 4, 6], 4, &mut stream_rng(0, &[]));
        assert!(fit.degenerate);
        assert_eq!(fit.assignment.occupied(), 3);
    }

    #[test]
    fn swap_objective_is_monotone() {
        let mut rng = stream_rng(5, &[]);
        for seed in 0..20 {
            let data = random_points(60, seed);
            let rows: Vec<usize> = (0..60).map(|_| rng.random_range(0..60)).collect();
            let distinct = DistinctPoints::new(&data, &rows);
            let dist = distinct.distances(&data);
            let fit = pam_weighted(&dist, &distinct.weights, 2 + seed as usize % 6);
            for w in fit.trace.windows(2) {
                assert!(w[1] < w[0]);
            }
            // local optimality: no single swap improves
            let n = distinct.len();
            let cost = |med: &[usize]| -> f64 {
                (0..n)
                    .map(|j| distinct.weights[j] * med.iter().map(|&m| dist[j * n + m]).fold(f64::INFINITY, f64::min))
                    .sum()
            };
            let base = cost(&fit.medoids);
            for slot in 0..fit.medoids.len() {
                for x in (0..n).filter(|x| !fit.medoids.contains(x)) {
                    let mut m = fit.medoids.clone();
                    m[slot] = x;
                    assert!(cost(&m) >= base - 1e-9);
                }
            }
        }
    }
}
