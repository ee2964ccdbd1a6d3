//! Degradation studies relating the reference-free metrics to F1, the NLI
//! verification experiment, and the RaTE baseline.

mod config;
mod correlate;
mod rate;
mod records;
mod study;
mod verify;

use thiserror::Error;

use crate::adequacy::AdequacyError;
use crate::gateway::GatewayError;
use crate::mutation::MutationError;
use crate::taxonomy::TaxonomyError;

pub use config::{DatasetConfig, StudyConfig, LARGE_TAXONOMY};
pub use correlate::{
    correlate, correlation_report, plot_csv, plot_rows, Correlation, CorrelationReport, GroupReport, Metric,
};
pub use rate::{rate_prompt, rate_score, RateResult};
pub use records::{
    encode_records, parse_records, read_records, write_records, RecordKey, RecordSink, StudyRecord, RECORD_HEADER,
};
pub use study::{run_study, study_vocabulary, RunOptions, ScoringContext, StudySummary};
pub use verify::{nli_verification, VerificationReport, VerifyOptions, WindowPrf};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("records line {line}: {message}")]
    Records { line: usize, message: String },
    #[error("taxonomy has no edge between natural concepts")]
    NoEdges,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Adequacy(#[from] AdequacyError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
