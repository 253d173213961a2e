//! Label alignment between a candidate clustering and a reference.
//!
//! A [`Permutation`] maps each candidate label to a reference label. The
//! exact matcher maximizes the agreement count (the trace of the contingency
//! table after relabeling) with the Hungarian algorithm; among optimal
//! permutations it returns the lexicographically smallest. The heuristic
//! greedily fixes the largest remaining cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CrispAssignment;

/// Largest `k` the exact matcher accepts by default.
pub const EXACT_MATCH_BOUND: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherKind {
    Exact,
    Heuristic,
}

impl std::str::FromStr for MatcherKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatcherKind::Exact),
            "heuristic" => Ok(MatcherKind::Heuristic),
            _ => Err(format!("unknown matcher `{s}`")),
        }
    }
}

/// `counts[a][b]`: cases labelled `a` in the first and `b` in the second
/// assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    k: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), k * k);
        Self { k, counts }
    }

    /// Row-major cells.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.k + b]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks_exact(self.k).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k).map(|b| (0..self.k).map(|a| self.get(a, b)).sum()).collect()
    }

    /// Agreement count after mapping row labels through `perm`.
    pub fn trace_under(&self, perm: &Permutation) -> u64 {
        perm.0.iter().enumerate().map(|(a, &b)| self.get(a, b)).sum()
    }
}

/// Cross-tabulates two assignments of equal length and equal `k`.
pub fn contingency(a: &CrispAssignment, b: &CrispAssignment) -> Result<ContingencyTable> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.k() != b.k() {
        return Err(Error::InvalidData(format!(
            "cluster counts differ: {} vs {}",
            a.k(),
            b.k()
        )));
    }
    Ok(contingency_unchecked(a.labels(), b.labels(), a.k()))
}

pub(crate) fn contingency_unchecked(a: &[usize], b: &[usize], k: usize) -> ContingencyTable {
    let mut counts = vec![0u64; k * k];
    for (&x, &y) in a.iter().zip(b) {
        counts[x * k + y] += 1;
    }
    ContingencyTable { k, counts }
}

/// A bijection on `0..k`, `perm[a]` being the new name of label `a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let k = map.len();
        let mut seen = vec![false; k];
        for &v in &map {
            if v >= k || seen[v] {
                return Err(Error::NotAPermutation(k));
            }
            seen[v] = true;
        }
        Ok(Self(map))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (a, &b) in self.0.iter().enumerate() {
            inv[b] = a;
        }
        Self(inv)
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &Permutation) -> Self {
        Self(self.0.iter().map(|&b| other.0[b]).collect())
    }
}

/// Renames every label through `perm`.
pub fn apply_permutation(assignment: &CrispAssignment, perm: &Permutation) -> Result<CrispAssignment> {
    if perm.len() != assignment.k() {
        return Err(Error::NotAPermutation(assignment.k()));
    }
    let labels = assignment.labels().iter().map(|&l| perm.0[l]).collect();
    CrispAssignment::new(labels, assignment.k())
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian algorithm,
/// shortest augmenting paths with potentials). Returns `row -> column`.
fn hungarian_min(cost: &[i128], n: usize) -> Vec<usize> {
    const INF: i128 = i128::MAX / 4;
    // 1-based arrays; index 0 is the virtual source
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-cost assignment `row -> column` for a square `k × k` cost matrix.
pub(crate) fn min_cost_permutation(cost: &[i128], k: usize) -> Permutation {
    assert_eq!(cost.len(), k * k);
    Permutation(hungarian_min(cost, k))
}

/// Maximum-trace permutation of a contingency table; the lexicographically
/// smallest one among ties.
pub fn max_trace_permutation(table: &ContingencyTable) -> Permutation {
    let k = table.k();
    // Fold the lexicographic order into the integer objective: position `a`
    // choosing `b` costs b·k^(k-1-a). The total penalty stays below k^k, so
    // one unit of agreement, scaled by k^k, always dominates it.
    let kk = k as i128;
    let scale = kk.pow(k as u32);
    let place: Vec<i128> = (0..k).map(|a| kk.pow((k - 1 - a) as u32)).collect();
    let mut cost = vec![0i128; k * k];
    for a in 0..k {
        for b in 0..k {
            cost[a * k + b] = b as i128 * place[a] - table.get(a, b) as i128 * scale;
        }
    }
    Permutation(hungarian_min(&cost, k))
}

/// Exact alignment of `candidate` onto `reference`.
pub fn align_labels_exact(candidate: &CrispAssignment, reference: &CrispAssignment) -> Result<Permutation> {
    align_labels_exact_bounded(candidate, reference, EXACT_MATCH_BOUND)
}

pub fn align_labels_exact_bounded(
    candidate: &CrispAssignment,
    reference: &CrispAssignment,
    bound: usize,
) -> Result<Permutation> {
    if candidate.k() > bound {
        return Err(Error::KTooLarge {
            k: candidate.k(),
            bound,
        });
    }
    Ok(max_trace_permutation(&contingency(candidate, reference)?))
}

/// Greedy largest-cell matching on a contingency table. Ties go to the lowest
/// row, then the lowest column.
pub fn greedy_permutation(table: &ContingencyTable) -> Permutation {
    let k = table.k();
    let mut cells: Vec<(u64, usize, usize)> = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .map(|(a, b)| (table.get(a, b), a, b))
        .collect();
    cells.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut map = vec![usize::MAX; k];
    let mut col_used = vec![false; k];
    let mut fixed = 0;
    for (_, a, b) in cells {
        if fixed == k {
            break;
        }
        if map[a] == usize::MAX && !col_used[b] {
            map[a] = b;
            col_used[b] = true;
            fixed += 1;
        }
    }
    Permutation(map)
}

pub fn align_labels_heuristic(candidate: &CrispAssignment, reference: &CrispAssignment) -> Result<Permutation> {
    Ok(greedy_permutation(&contingency(candidate, reference)?))
}

/// Aligns with the requested matcher, falling back to the heuristic above the
/// exact bound.
pub fn align_labels(
    kind: MatcherKind,
    candidate: &CrispAssignment,
    reference: &CrispAssignment,
) -> Result<Permutation> {
    match kind {
        MatcherKind::Exact if candidate.k() <= EXACT_MATCH_BOUND => align_labels_exact(candidate, reference),
        _ => align_labels_heuristic(candidate, reference),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn assign(labels: &[usize], k: usize) -> CrispAssignment {
        CrispAssignment::new(labels.to_vec(), k).unwrap()
    }

    /// Oracle: every permutation, in lexicographic order.
    fn all_permutations(k: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
            if prefix.len() == used.len() {
                out.push(prefix.clone());
                return;
            }
            for v in 0..used.len() {
                if !used[v] {
                    used[v] = true;
                    prefix.push(v);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[v] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; k], &mut out);
        out
    }

    fn exhaustive_best(table: &ContingencyTable) -> (u64, Vec<usize>) {
        let mut best = (0, Vec::new());
        for p in all_permutations(table.k()) {
            let t = table.trace_under(&Permutation(p.clone()));
            if best.1.is_empty() || t > best.0 {
                best = (t, p);
            }
        }
        best
    }

    fn random_table(rng: &mut impl Rng, k: usize) -> ContingencyTable {
        ContingencyTable::from_counts(k, (0..k * k).map(|_| rng.random_range(0..6)).collect())
    }

    #[test]
    fn contingency_examples() {
        let t = contingency(&assign(&[0, 0, 1, 1], 2), &assign(&[1, 1, 0, 0], 2)).unwrap();
        assert_eq!(t.counts, vec![0, 2, 2, 0]);
        let a = assign(&[0, 1, 0, 1], 2);
        let t = contingency(&a, &a).unwrap();
        assert_eq!(t.counts, vec![2, 0, 0, 2]);
        assert!(matches!(
            contingency(&a, &assign(&[0, 1], 2)),
            Err(Error::LengthMismatch { .. })
        ));

        let mut rng = stream_rng(1, &[]);
        let x: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
        let y: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
        let t = contingency(&assign(&x, 3), &assign(&y, 3)).unwrap();
        assert_eq!(t.total(), 50);
        for a in 0..3 {
            for b in 0..3 {
                let direct = x.iter().zip(&y).filter(|(&p, &q)| p == a && q == b).count();
                assert_eq!(t.get(a, b), direct as u64);
            }
        }
        assert_eq!(
            t.row_sums(),
            assign(&x, 3).sizes().iter().map(|&s| s as u64).collect::<Vec<_>>()
        );
    }

    #[test]
    fn exact_examples() {
        let p = align_labels_exact(&assign(&[0, 0, 1, 1], 2), &assign(&[1, 1, 0, 0], 2)).unwrap();
        assert_eq!(p.as_slice(), &[1, 0]);
        let a = assign(&[0, 1, 2, 2, 1], 3);
        assert_eq!(align_labels_exact(&a, &a).unwrap(), Permutation::identity(3));
        let big = assign(&[0, 12], 13);
        assert!(matches!(align_labels_exact(&big, &big), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn exact_matches_exhaustive_search_including_tie_break() {
        let mut rng = stream_rng(2, &[]);
        for _ in 0..500 {
            let k = rng.random_range(1..=6);
            let t = random_table(&mut rng, k);
            let (best, lexi) = exhaustive_best(&t);
            let p = max_trace_permutation(&t);
            assert_eq!(t.trace_under(&p), best);
            assert_eq!(p.as_slice(), lexi.as_slice());
        }
        // all-zero table: every permutation ties, the identity is smallest
        let t = ContingencyTable::from_counts(4, vec![0; 16]);
        assert_eq!(max_trace_permutation(&t), Permutation::identity(4));
    }

    #[test]
    fn exact_objective_is_relabel_invariant() {
        let mut rng = stream_rng(3, &[]);
        for _ in 0..100 {
            let k = rng.random_range(2..=7);
            let a: Vec<usize> = (0..40).map(|_| rng.random_range(0..k)).collect();
            let r: Vec<usize> = (0..40).map(|_| rng.random_range(0..k)).collect();
            let (a, r) = (assign(&a, k), assign(&r, k));
            let mut shuffle: Vec<usize> = (0..k).collect();
            shuffle.shuffle(&mut rng);
            let relabelled = apply_permutation(&a, &Permutation::new(shuffle).unwrap()).unwrap();
            let t1 = contingency(&a, &r).unwrap();
            let t2 = contingency(&relabelled, &r).unwrap();
            assert_eq!(
                t1.trace_under(&max_trace_permutation(&t1)),
                t2.trace_under(&max_trace_permutation(&t2))
            );
        }
    }

    #[test]
    fn heuristic_examples() {
        let t = ContingencyTable::from_counts(3, vec![9, 1, 0, 2, 8, 1, 0, 1, 7]);
        assert_eq!(greedy_permutation(&t), Permutation::identity(3));
        let p = align_labels_heuristic(&assign(&[0, 0, 1, 1], 2), &assign(&[1, 1, 0, 0], 2)).unwrap();
        assert_eq!(p.as_slice(), &[1, 0]);
    }

    #[test]
    fn heuristic_is_near_optimal_on_random_tables() {
        let mut rng = stream_rng(4, &[]);
        let mut good = 0;
        for _ in 0..1000 {
            let k = rng.random_range(2..=6);
            // clustered-looking tables: a hidden permutation plus noise
            let mut hidden: Vec<usize> = (0..k).collect();
            hidden.shuffle(&mut rng);
            let counts = (0..k * k)
                .map(|i| {
                    let (a, b) = (i / k, i % k);
                    let base = if hidden[a] == b { rng.random_range(5..30) } else { 0 };
                    base + rng.random_range(0..8)
                })
                .collect();
            let t = ContingencyTable::from_counts(k, counts);
            let (best, _) = exhaustive_best(&t);
            if t.trace_under(&greedy_permutation(&t)) as f64 >= 0.9 * best as f64 {
                good += 1;
            }
        }
        assert!(good >= 950, "{good} of 1000");
    }

    #[test]
    fn heuristic_equals_exact_under_dominant_diagonal() {
        let mut rng = stream_rng(5, &[]);
        for _ in 0..300 {
            let k = rng.random_range(2..=8);
            let mut hidden: Vec<usize> = (0..k).collect();
            hidden.shuffle(&mut rng);
            let mut counts = vec![0u64; k * k];
            for a in 0..k {
                let off: Vec<u64> = (0..k).map(|_| rng.random_range(0..10)).collect();
                let max_off = off
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| *b != hidden[a])
                    .map(|(_, &v)| v)
                    .max()
                    .unwrap_or(0);
                for b in 0..k {
                    counts[a * k + b] = if b == hidden[a] {
                        2 * max_off.max(1) + rng.random_range(0..5)
                    } else {
                        off[b]
                    };
                }
            }
            // column dominance as well, so the diagonal is dominant both ways
            for b in 0..k {
                let a_star = hidden.iter().position(|&h| h == b).unwrap();
                let max_col = (0..k)
                    .filter(|&a| a != a_star)
                    .map(|a| counts[a * k + b])
                    .max()
                    .unwrap_or(0);
                let cell = &mut counts[a_star * k + b];
                *cell = (*cell).max(2 * max_col.max(1));
            }
            let t = ContingencyTable::from_counts(k, counts);
            assert_eq!(greedy_permutation(&t), max_trace_permutation(&t));
            assert_eq!(greedy_permutation(&t).as_slice(), hidden.as_slice());
        }
    }

    #[test]
    fn permutation_laws() {
        let a = assign(&[0, 1, 0], 2);
        assert_eq!(apply_permutation(&a, &Permutation::identity(2)).unwrap(), a);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(apply_permutation(&a, &swap).unwrap().labels(), &[1, 0, 1]);
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(matches!(
            apply_permutation(&a, &Permutation::identity(3)),
            Err(Error::NotAPermutation(_))
        ));

        let mut rng = stream_rng(6, &[]);
        for _ in 0..100 {
            let k = rng.random_range(1..8);
            let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..k)).collect();
            let a = assign(&labels, k);
            let mut p1: Vec<usize> = (0..k).collect();
            p1.shuffle(&mut rng);
            let mut p2 = p1.clone();
            p2.shuffle(&mut rng);
            let (p1, p2) = (Permutation::new(p1).unwrap(), Permutation::new(p2).unwrap());
            let back = apply_permutation(&apply_permutation(&a, &p1).unwrap(), &p1.inverse()).unwrap();
            assert_eq!(back, a);
            let twice = apply_permutation(&apply_permutation(&a, &p1).unwrap(), &p2).unwrap();
            assert_eq!(twice, apply_permutation(&a, &p1.then(&p2)).unwrap());
        }
    }
}
