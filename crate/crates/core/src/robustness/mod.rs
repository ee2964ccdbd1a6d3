//! Robustness metrics: CSC, the SP baseline, and the rank correlation they
//! share with the study harness.

mod csc;
mod kendall;
mod pairs;
mod sp;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use csc::{csc, csc_with_matrix, representations};
pub use kendall::{kendall_tau_b, stars, tau_counts, CorrelationResult, TauCounts};
pub use pairs::{PairPolicy, PairSample, EXHAUSTIVE_LIMIT, SAMPLED_PAIRS};
pub use sp::{semantic_proximity, semantic_proximity_with_matrix, sibling_groups, SemanticProximity};

#[derive(Debug, Error)]
pub enum RobustnessError {
    /// The statistic is undefined, reported as NA downstream.
    #[error("undefined correlation: {0}")]
    Degenerate(String),
    #[error("paired samples differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite value in correlation input")]
    NonFinite,
    #[error("no group of two or more sibling leaves")]
    NoSiblingGroups,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}
