use super::{BaseKind, DistinctPoints, FittedBaseModel, Representatives};
use crate::types::{CrispAssignment, Dataset};

/// Minimum spanning tree edges `(weight, a, b)` with `a < b`, by Prim's
/// algorithm on a dense distance matrix.
fn minimum_spanning_tree(dist: &[f64], n: usize) -> Vec<(f64, usize, usize)> {
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = dist[current * n + v];
            if d < best[v] || (d == best[v] && current < parent[v]) {
                best[v] = d;
                parent[v] = current;
            }
            if next == usize::MAX || best[v] < best[next] {
                next = v;
            }
        }
        in_tree[next] = true;
        let p = parent[next];
        edges.push((best[next], p.min(next), p.max(next)));
        current = next;
    }
    edges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage labels for `k` clusters over `n` points, numbered by their
/// smallest member. Merges run in ascending height; equal heights merge the
/// smallest index pair first.
pub(crate) fn single_link_labels(dist: &[f64], n: usize, k: usize) -> (Vec<usize>, f64) {
    let mut edges = minimum_spanning_tree(dist, n);
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut components = n;
    let mut height = 0.0;
    for &(w, a, b) in &edges {
        if components <= k {
            break;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            components -= 1;
            height = w;
        }
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let labels = (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect();
    (labels, height)
}

/// Single-linkage agglomeration on the distinct resample points, cut at `k`
/// clusters. The model keeps every distinct point with its label.
pub fn fit_single_link(data: &Dataset, rows: &[usize], k: usize) -> FittedBaseModel {
    assert!(k >= 1, "k must be positive");
    let distinct = DistinctPoints::new(data, rows);
    let n = distinct.len();
    let dist = distinct.distances(data);
    let (labels, height) = single_link_labels(&dist, n, k.min(n));
    FittedBaseModel {
        kind: BaseKind::SingleLink,
        rows: rows.to_vec(),
        assignment: CrispAssignment::new(distinct.expand(&labels), k).expect("labels below k"),
        representatives: Representatives::Points {
            rows: distinct.rows.clone(),
            labels,
        },
        degenerate: n < k,
        objective: height,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn spirals(n_per: usize) -> (Dataset, Vec<usize>) {
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for arm in 0..2 {
            for i in 0..n_per {
                let t = 0.5 + 3.0 * std::f64::consts::PI * i as f64 / n_per as f64;
                let r = 1.0 + t;
                let phase = arm as f64 * std::f64::consts::PI;
                rows.push(vec![r * (t + phase).cos(), r * (t + phase).sin()]);
                truth.push(arm);
            }
        }
        (Dataset::from_rows(&rows).unwrap(), truth)
    }

    /// Oracle: remove the k-1 heaviest edges of a Kruskal MST over all pairs.
    fn mst_cut_oracle(dist: &[f64], n: usize, k: usize) -> Vec<usize> {
        let mut all = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                all.push((dist[a * n + b], a, b));
            }
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut parent: Vec<usize> = (0..n).collect();
        let mut tree = Vec::new();
        for (w, a, b) in all {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                tree.push((w, a, b));
            }
        }
        tree.truncate(n - k);
        let mut parent: Vec<usize> = (0..n).collect();
        for (_, a, b) in tree {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        (0..n).map(|i| find(&mut parent, i)).collect()
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn spirals_recovered() {
        let (data, truth) = spirals(100);
        let rows: Vec<usize> = (0..200).collect();
        let fit = fit_single_link(&data, &rows, 2);
        assert!(same_partition(fit.assignment.labels(), &truth));
        let distinct = DistinctPoints::new(&data, &rows);
        let oracle = mst_cut_oracle(&distinct.distances(&data), 200, 2);
        assert!(same_partition(fit.assignment.labels(), &oracle));
    }

    #[test]
    fn matches_mst_cut_on_random_points() {
        let mut rng = stream_rng(4, &[]);
        for _ in 0..20 {
            let n = 30;
            let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
            let data = Dataset::from_rows(&rows).unwrap();
            let d = DistinctPoints::new(&data, &(0..n).collect::<Vec<_>>());
            let dist = d.distances(&data);
            for k in 1..6 {
                let (labels, _) = single_link_labels(&dist, n, k);
                assert!(same_partition(&labels, &mst_cut_oracle(&dist, n, k)));
            }
        }
    }

    #[test]
    fn trivial_cuts() {
        let (data, _) = spirals(5);
        let rows: Vec<usize> = (0..10).collect();
        assert_eq!(fit_single_link(&data, &rows, 1).assignment.occupied(), 1);
        let all = fit_single_link(&data, &rows, 10);
        assert_eq!(all.assignment.occupied(), 10);
        assert!(!all.degenerate);
        assert!(fit_single_link(&data, &rows, 11).degenerate);
    }

    #[test]
    fn cuts_are_nested() {
        let mut rng = stream_rng(8, &[]);
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let d = DistinctPoints::new(&data, &(0..n).collect::<Vec<_>>());
        let dist = d.distances(&data);
        for k in 2..10 {
            let (fine, _) = single_link_labels(&dist, n, k);
            let (coarse, _) = single_link_labels(&dist, n, k - 1);
            for i in 0..n {
                for j in 0..n {
                    if fine[i] == fine[j] {
                        assert_eq!(coarse[i], coarse[j]);
                    }
                }
            }
        }
    }
}
