//! Model selection over a range of cluster counts.
//!
//! Each `K` is aggregated independently with the same resampling template, so
//! the CIC values are comparable. `K = 1` is not resampled: it carries no
//! information and its CIC is 0.

use serde::Serialize;

use crate::baselearn::{BaseClusterer, BaseKind, FittedBaseModel, Predictor};
use crate::cic::{cic, CicBreakdown};
use crate::error::{Error, Result};
use crate::metrics::silhouette;
use crate::mmcc::{mmcc_fit_with, MmccConfig, MmccResult};
use crate::par::map_range;
use crate::rng::{stream_rng, tag};
use crate::types::{CrispAssignment, Dataset, ModelDiagnostics, ProbabilityMatrix};

/// Models skipping more than this fraction of rounds are flagged degenerate.
pub const DEGENERATE_ROUND_LIMIT: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Shared by every `K`; its `k` field is ignored.
    pub template: MmccConfig,
    /// Also compute the silhouette of a single full-sample fit per `K`.
    pub silhouette: bool,
}

impl SweepConfig {
    pub fn new(k_min: usize, k_max: usize, template: MmccConfig) -> Self {
        Self {
            k_min,
            k_max,
            template,
            silhouette: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= kmin <= kmax, got {} and {}",
                self.k_min, self.k_max
            )));
        }
        if self.k_max >= 2 {
            MmccConfig {
                k: 2,
                ..self.template.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn ks(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }
}

#[derive(Debug, Clone)]
pub struct ModelRecord {
    pub k: usize,
    pub breakdown: CicBreakdown,
    pub probs: ProbabilityMatrix,
    pub majority: CrispAssignment,
    /// `None` for `K = 1` and for models where no round voted.
    pub mmcc: Option<MmccResult>,
    pub degenerate: bool,
    pub silhouette: Option<f64>,
}

impl ModelRecord {
    pub fn diagnostics(&self) -> ModelDiagnostics {
        ModelDiagnostics {
            k: self.k,
            information: self.breakdown.information,
            uncertainty: self.breakdown.uncertainty,
            cic: self.breakdown.cic,
            rmc: self.breakdown.rmc,
            cluster_probs: self.breakdown.cluster_probs.clone(),
            gsd: self.breakdown.gsd.clone(),
            cellwise_row_sums: self.breakdown.cellwise_row_sums(),
            degenerate_fraction: self.mmcc.as_ref().map_or(0.0, MmccResult::degenerate_fraction),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Selected,
    /// Every candidate with `K >= 2` was flagged degenerate.
    AllDegenerate,
    /// The range holds no `K >= 2`.
    NoCandidates,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub models: Vec<ModelRecord>,
    pub selected_k: Option<usize>,
    pub status: SweepStatus,
}

impl SweepReport {
    pub fn model(&self, k: usize) -> Option<&ModelRecord> {
        self.models.iter().find(|m| m.k == k)
    }
}

/// The single base fit on the whole sample, as used for the silhouette
/// baseline and as the standard reference solution.
pub fn full_sample_fit(data: &Dataset, base: &dyn BaseClusterer, k: usize, seed: u64) -> FittedBaseModel {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    base.fit(data, &rows, k, &mut stream_rng(seed, &[tag::BASELINE, k as u64]))
}

/// Sweep-level degeneration: too many skipped rounds, or a final majority that
/// occupies fewer than `K` clusters.
pub fn is_degenerate(result: &MmccResult) -> bool {
    result.degenerate_fraction() > DEGENERATE_ROUND_LIMIT || result.majority.occupied() < result.k
}

/// Highest CIC among non-degenerate models with `K >= 2`; ties go to the
/// smaller `K`.
pub fn select_k(models: impl IntoIterator<Item = (usize, f64, bool)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, c, degenerate) in models {
        if k < 2 || degenerate || !c.is_finite() {
            continue;
        }
        if best.is_none_or(|(bk, bc)| c > bc || (c == bc && k < bk)) {
            best = Some((k, c));
        }
    }
    best.map(|b| b.0)
}

fn single_cluster_record(n: usize) -> ModelRecord {
    let majority = CrispAssignment::new(vec![0; n], 1).expect("single label");
    let probs = ProbabilityMatrix::crisp(&majority);
    ModelRecord {
        k: 1,
        breakdown: cic(&probs),
        probs,
        majority,
        mmcc: None,
        degenerate: false,
        silhouette: None,
    }
}

pub fn run_sweep(data: &Dataset, cfg: &SweepConfig) -> Result<SweepReport> {
    let predictor = Predictor::new(cfg.template.predictor, data);
    run_sweep_with(data, cfg, &cfg.template.base, &predictor)
}

pub fn run_sweep_with(
    data: &Dataset,
    cfg: &SweepConfig,
    base: &dyn BaseClusterer,
    predictor: &Predictor,
) -> Result<SweepReport> {
    cfg.validate()?;
    let n = data.n_rows();
    let fits = map_range(
        cfg.template.execution,
        cfg.k_min,
        cfg.k_max + 1,
        |k| -> Result<ModelRecord> {
            if k == 1 {
                return Ok(single_cluster_record(n));
            }
            let silhouette = cfg.silhouette.then(|| {
                silhouette(
                    data,
                    full_sample_fit(data, base, k, cfg.template.seed).assignment.labels(),
                )
            });
            let mmcc_cfg = MmccConfig {
                k,
                ..cfg.template.clone()
            };
            match mmcc_fit_with(data, &mmcc_cfg, base, predictor) {
                Ok(res) => Ok(ModelRecord {
                    k,
                    breakdown: cic(&res.probs),
                    probs: res.probs.clone(),
                    majority: res.majority.clone(),
                    degenerate: is_degenerate(&res),
                    mmcc: Some(res),
                    silhouette,
                }),
                Err(Error::AllRoundsDegenerate { .. }) => {
                    log::warn!("k = {k}: every round was degenerate");
                    let mut rec = single_cluster_record(n);
                    rec.k = k;
                    rec.degenerate = true;
                    rec.silhouette = silhouette;
                    for v in [
                        &mut rec.breakdown.information,
                        &mut rec.breakdown.uncertainty,
                        &mut rec.breakdown.cic,
                    ] {
                        *v = f64::NAN;
                    }
                    Ok(rec)
                }
                Err(e) => {
                    log::error!("k = {k}: {e}");
                    Err(e)
                }
            }
        },
    );
    let models = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let selected_k = select_k(models.iter().map(|m| (m.k, m.breakdown.cic, m.degenerate)));
    let status = match selected_k {
        Some(_) => SweepStatus::Selected,
        None if cfg.k_max >= 2 => SweepStatus::AllDegenerate,
        None => SweepStatus::NoCandidates,
    };
    Ok(SweepReport {
        models,
        selected_k,
        status,
    })
}

/// Convenience for the standard base learners.
pub fn sweep_kinds(
    data: &Dataset,
    k_min: usize,
    k_max: usize,
    base: BaseKind,
    template: MmccConfig,
) -> Result<SweepReport> {
    run_sweep(data, &SweepConfig::new(k_min, k_max, MmccConfig { base, ..template }))
}
