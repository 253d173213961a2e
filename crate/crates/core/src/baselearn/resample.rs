use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

/// How resamples are drawn. Both schemes draw with replacement; they differ
/// only in the intended size (`n = N` for the bootstrap, `n < N` otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleScheme {
    Bootstrap,
    Subsample,
}

impl std::str::FromStr for ResampleScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bootstrap" => Ok(ResampleScheme::Bootstrap),
            "subsample" => Ok(ResampleScheme::Subsample),
            _ => Err(format!("unknown resampling scheme `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleIndices {
    pub indices: Vec<usize>,
    pub scheme: ResampleScheme,
}

impl ResampleIndices {
    pub fn distinct_count(&self) -> usize {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

/// `size` i.i.d. uniform draws from `0..n_cases`.
pub fn draw_resample(n_cases: usize, size: usize, scheme: ResampleScheme, rng: &mut SimRng) -> ResampleIndices {
    assert!(n_cases >= 1, "cannot resample from an empty sample");
    let indices = (0..size).map(|_| rng.random_range(0..n_cases)).collect();
    ResampleIndices { indices, scheme }
}
