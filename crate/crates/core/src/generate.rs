//! Synthetic two-dimensional datasets with known cluster structure.
//!
//! `noise` is the standard deviation of isotropic Gaussian jitter added to
//! every point (for the blob families it is the within-cluster spread).

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag, SimRng};
use crate::types::{CrispAssignment, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// `k` round clusters with centers evenly spaced on a circle of radius 5.
    Blobs { k: usize },
    /// Four convex clusters in two pairs; each pair touches along a border.
    Flipper4,
    /// Two long parallel bars.
    Elongated2,
    /// A dense disk enclosed by a ring.
    Ring,
    /// Two interleaved spiral arms.
    Spiral,
    /// A round blob, a bar and an arc.
    Modeclus3,
}

impl Shape {
    pub fn n_clusters(&self) -> usize {
        match self {
            Shape::Blobs { k } => *k,
            Shape::Flipper4 => 4,
            Shape::Elongated2 | Shape::Ring | Shape::Spiral => 2,
            Shape::Modeclus3 => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Blobs { .. } => "blobs",
            Shape::Flipper4 => "flipper4",
            Shape::Elongated2 => "elongated2",
            Shape::Ring => "ring",
            Shape::Spiral => "spiral",
            Shape::Modeclus3 => "modeclus3",
        }
    }

    /// Parses a shape name; `k` only applies to blobs.
    pub fn parse(name: &str, k: usize) -> Result<Self> {
        Ok(match name {
            "blobs" => Shape::Blobs { k },
            "flipper4" => Shape::Flipper4,
            "elongated2" => Shape::Elongated2,
            "ring" => Shape::Ring,
            "spiral" => Shape::Spiral,
            "modeclus3" => Shape::Modeclus3,
            _ => return Err(Error::InvalidConfig(format!("unknown shape `{name}`"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Dataset,
    pub labels: CrispAssignment,
    /// Generating centers for the blob families, empty otherwise.
    pub centers: Vec<[f64; 2]>,
}

impl Generated {
    /// CSV with columns `x1,x2,label`; labels are 1-based.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x1", "x2", "label"]).map_err(csv_err)?;
        for (row, &l) in self.data.rows().zip(self.labels.labels()) {
            out.write_record([format!("{:?}", row[0]), format!("{:?}", row[1]), (l + 1).to_string()])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Cluster sizes: `n` split as evenly as possible, earlier clusters larger.
fn split(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|j| n / k + usize::from(j < n % k)).collect()
}

fn jitter(rng: &mut SimRng, noise: f64) -> [f64; 2] {
    if noise == 0.0 {
        return [0.0, 0.0];
    }
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    [noise * dx, noise * dy]
}

/// Point `i` of `m` on spiral arm `arm`, without noise.
pub fn spiral_point(arm: usize, i: usize, m: usize) -> [f64; 2] {
    let t = 0.5 + std::f64::consts::TAU * i as f64 / m.max(1) as f64;
    let phase = arm as f64 * std::f64::consts::PI;
    let r = 1.0 + t;
    [r * (t + phase).cos(), r * (t + phase).sin()]
}

pub fn generate(shape: Shape, n: usize, noise: f64, seed: u64) -> Result<Generated> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("need at least 4 points, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise must be a finite non-negative number, got {noise}"
        )));
    }
    let k = shape.n_clusters();
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!("cannot place {k} clusters on {n} points")));
    }
    let mut rng = stream_rng(seed, &[tag::GENERATE]);
    let sizes = split(n, k);
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut centers = Vec::new();
    let tau = std::f64::consts::TAU;

    for (l, &size) in sizes.iter().enumerate() {
        for i in 0..size {
            let base: [f64; 2] = match shape {
                Shape::Blobs { k } => {
                    let a = tau * l as f64 / k as f64;
                    if k == 1 {
                        [0.0, 0.0]
                    } else {
                        [5.0 * a.cos(), 5.0 * a.sin()]
                    }
                }
                Shape::Flipper4 => [if l < 2 { -4.0 } else { 4.0 }, if l % 2 == 0 { -1.2 } else { 1.2 }],
                Shape::Elongated2 => [rng.random_range(-6.0..6.0), if l == 0 { -1.5 } else { 1.5 }],
                Shape::Ring => {
                    if l == 0 {
                        // uniform on the unit disk
                        let (r, a): (f64, f64) = (rng.random::<f64>().sqrt(), rng.random_range(0.0..tau));
                        [r * a.cos(), r * a.sin()]
                    } else {
                        let a = tau * i as f64 / size as f64;
                        [4.0 * a.cos(), 4.0 * a.sin()]
                    }
                }
                Shape::Spiral => spiral_point(l, i, size),
                Shape::Modeclus3 => match l {
                    0 => [0.0, 0.0],
                    1 => [rng.random_range(-3.0..3.0), 4.0],
                    _ => {
                        let a = rng.random_range(-0.5 * std::f64::consts::PI..0.5 * std::f64::consts::PI);
                        [4.0 + 2.0 * a.cos(), 2.0 * a.sin()]
                    }
                },
            };
            if i == 0 && matches!(shape, Shape::Blobs { .. } | Shape::Flipper4) {
                centers.push(base);
            }
            let d = match (shape, l) {
                // the round blob of the mixed dataset has its own spread
                (Shape::Modeclus3, 0) => jitter(&mut rng, 0.6 + noise),
                _ => jitter(&mut rng, noise),
            };
            points.push([base[0] + d[0], base[1] + d[1]]);
            labels.push(l);
        }
    }

    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    Ok(Generated {
        data: Dataset::from_rows(&rows)?,
        labels: CrispAssignment::new(labels, k)?,
        centers,
    })
}
