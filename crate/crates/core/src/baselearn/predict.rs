use serde::{Deserialize, Serialize};

use super::{FittedBaseModel, NearestNeighborIndex, Representatives};
use crate::types::{sq_dist, CrispAssignment, Dataset};

/// How out-of-resample cases are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    /// Closest center or medoid. Models without one-point-per-cluster
    /// representatives (single-link) fall back to 1-NN.
    #[serde(rename = "rep")]
    NearestRepresentative,
    /// Label of the nearest resample point.
    #[serde(rename = "nn1")]
    NearestNeighbor,
}

impl std::str::FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rep" => Ok(PredictorKind::NearestRepresentative),
            "nn1" => Ok(PredictorKind::NearestNeighbor),
            _ => Err(format!("unknown predictor `{s}`")),
        }
    }
}

fn representative_coords<'a>(rep: &'a Representatives, data: &'a Dataset) -> Option<Vec<&'a [f64]>> {
    match rep {
        Representatives::Centers { coords, n_cols } => Some(coords.chunks_exact(*n_cols).collect()),
        Representatives::Medoids { rows } => Some(rows.iter().map(|&r| data.row(r)).collect()),
        Representatives::Points { .. } => None,
    }
}

/// Assigns each case to its Euclidean-nearest center or medoid; ties go to
/// the lowest label.
pub fn predict_nearest_representative(model: &FittedBaseModel, data: &Dataset, cases: &[usize]) -> CrispAssignment {
    let labels = match representative_coords(&model.representatives, data) {
        Some(reps) => {
            assert!(!reps.is_empty(), "model has no representatives");
            cases
                .iter()
                .map(|&i| {
                    let x = data.row(i);
                    let mut best = (0, f64::INFINITY);
                    for (l, r) in reps.iter().enumerate() {
                        let d = sq_dist(x, r);
                        if d < best.1 {
                            best = (l, d);
                        }
                    }
                    best.0
                })
                .collect()
        }
        None => {
            let Representatives::Points { rows, labels } = &model.representatives else {
                unreachable!()
            };
            return predict_1nn(rows, labels, model.assignment.k(), data, cases, None);
        }
    };
    CrispAssignment::new(labels, model.assignment.k()).expect("labels below k")
}

/// Labels each case with the label of its nearest labelled row. Equidistant
/// rows resolve to the lowest row index. Uses `index` when given, a linear
/// scan otherwise.
pub fn predict_1nn(
    labelled_rows: &[usize],
    labels: &[usize],
    k: usize,
    data: &Dataset,
    cases: &[usize],
    index: Option<&NearestNeighborIndex>,
) -> CrispAssignment {
    assert!(!labelled_rows.is_empty(), "no labelled rows to predict from");
    assert_eq!(labelled_rows.len(), labels.len());
    let mut label_of = vec![usize::MAX; data.n_rows()];
    for (&r, &l) in labelled_rows.iter().zip(labels) {
        if label_of[r] == usize::MAX {
            label_of[r] = l;
        }
    }
    let out = cases
        .iter()
        .map(|&i| {
            let x = data.row(i);
            let row = match index {
                Some(idx) => idx.nearest_filtered(x, |r| label_of[r] != usize::MAX).map(|t| t.0),
                None => {
                    let mut best: Option<(usize, f64)> = None;
                    for r in (0..data.n_rows()).filter(|&r| label_of[r] != usize::MAX) {
                        let d = sq_dist(x, data.row(r));
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((r, d));
                        }
                    }
                    best.map(|t| t.0)
                }
            };
            label_of[row.expect("nonempty labelled set")]
        })
        .collect();
    CrispAssignment::new(out, k).expect("labels below k")
}

/// Extends fitted resample solutions to the full sample.
///
/// Holds the kd-tree when 1-NN prediction is configured, so the index is built
/// once per dataset and shared across rounds and cluster counts.
#[derive(Debug, Clone)]
pub struct Predictor {
    kind: PredictorKind,
    index: Option<NearestNeighborIndex>,
}

impl Predictor {
    pub fn new(kind: PredictorKind, data: &Dataset) -> Self {
        // single-link models predict by 1-NN under either kind
        Self {
            kind,
            index: Some(NearestNeighborIndex::new(data)),
        }
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    /// Predicts `cases` from a fitted model.
    pub fn predict(&self, model: &FittedBaseModel, data: &Dataset, cases: &[usize]) -> CrispAssignment {
        let k = model.assignment.k();
        match (self.kind, &model.representatives) {
            (PredictorKind::NearestRepresentative, Representatives::Centers { .. })
            | (PredictorKind::NearestRepresentative, Representatives::Medoids { .. }) => {
                predict_nearest_representative(model, data, cases)
            }
            (_, Representatives::Points { rows, labels }) => {
                predict_1nn(rows, labels, k, data, cases, self.index.as_ref())
            }
            (PredictorKind::NearestNeighbor, _) => predict_1nn(
                &model.rows,
                model.assignment.labels(),
                k,
                data,
                cases,
                self.index.as_ref(),
            ),
        }
    }

    /// Full-length solution: resampled cases keep their fitted label, all
    /// other cases are predicted.
    pub fn complete(&self, model: &FittedBaseModel, data: &Dataset) -> CrispAssignment {
        let n = data.n_rows();
        let mut labels = vec![usize::MAX; n];
        for (&r, &l) in model.rows.iter().zip(model.assignment.labels()) {
            labels[r] = l;
        }
        let missing: Vec<usize> = (0..n).filter(|&i| labels[i] == usize::MAX).collect();
        if !missing.is_empty() {
            let predicted = self.predict(model, data, &missing);
            for (&i, &l) in missing.iter().zip(predicted.labels()) {
                labels[i] = l;
            }
        }
        CrispAssignment::new(labels, model.assignment.k()).expect("labels below k")
    }
}
