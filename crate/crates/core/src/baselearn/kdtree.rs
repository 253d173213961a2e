//! Exact nearest-neighbor search with a kd-tree.

use crate::types::{sq_dist, Dataset};

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// kd-tree over the rows of a dataset. Built once, queried from any thread.
#[derive(Debug, Clone)]
pub struct NearestNeighborIndex {
    points: Vec<f64>,
    n_cols: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

impl NearestNeighborIndex {
    pub fn new(data: &Dataset) -> Self {
        Self::with_leaf_size(data, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(data: &Dataset, leaf_size: usize) -> Self {
        let mut index = Self {
            points: data.values().to_vec(),
            n_cols: data.n_cols(),
            order: (0..data.n_rows()).collect(),
            nodes: Vec::new(),
            leaf_size: leaf_size.max(1),
        };
        index.build(0, data.n_rows());
        index
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n_cols..(i + 1) * self.n_cols]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= self.leaf_size {
            return id;
        }
        let m = self.n_cols;
        let (dim, spread) = (0..m)
            .map(|d| {
                let (lo, hi) =
                    self.order[start..end]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            let v = self.points[i * m + d];
                            (lo.min(v), hi.max(v))
                        });
                (d, hi - lo)
            })
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * m + dim].total_cmp(&points[b * m + dim])
        });
        let value = self.points[self.order[mid] * m + dim];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// Nearest row to `query` among rows accepted by `accept`, as
    /// `(row, squared distance)`. Equal distances resolve to the lowest row.
    pub fn nearest_filtered<F: Fn(usize) -> bool>(&self, query: &[f64], accept: F) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.search(0, query, &accept, &mut best);
        best
    }

    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        self.nearest_filtered(query, |_| true)
    }

    fn search<F: Fn(usize) -> bool>(&self, node: usize, q: &[f64], accept: &F, best: &mut Option<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if !accept(i) {
                        continue;
                    }
                    let d = sq_dist(q, self.point(i));
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d < bd || (d == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d));
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, accept, best);
                // `<=` keeps equidistant candidates with lower rows reachable
                if best.is_none_or(|(_, bd)| diff * diff <= bd) {
                    self.search(far, q, accept, best);
                }
            }
        }
    }
}
