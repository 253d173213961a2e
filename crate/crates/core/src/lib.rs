//! Resample-aggregated clustering with information-criterion model selection.
//!
//! A base cluster algorithm is fitted on many resamples of the data. Its
//! solutions are aligned to a running majority and accumulated as votes,
//! giving case-by-cluster membership probabilities. The number of clusters
//! is then chosen by the cluster information criterion computed from those
//! probabilities.

pub mod baselearn;
pub mod cic;
pub mod error;
pub mod generate;
pub mod matching;
pub mod metrics;
pub mod mmcc;
pub mod par;
pub mod preprocess;
pub mod rng;
pub mod sweep;
pub mod types;

pub use error::{Error, Result};
pub use types::{CrispAssignment, Dataset, ProbabilityMatrix, VoteMatrix};
