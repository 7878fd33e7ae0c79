//! Training-data preparation: topic discovery, response ranking,
//! auto-labeling and the human review round trip.

mod label;
mod lda;
mod lexrank;
mod preprocess;
mod review;

use thiserror::Error;

pub use label::{auto_label, Label, LabeledExample, Source};
pub use lda::{intent_id, intent_index, rank_intents, select_cluster, IntentSummary, LdaConfig, Sampler, TopicModel};
pub use lexrank::{lexrank, LexRankConfig, RankedResponse};
pub use preprocess::{preprocess, PreprocessConfig, TokenizedCorpus, DEFAULT_STOPWORDS};
pub use review::{review_export, review_import, REVIEW_HEADER};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("no input texts")]
    EmptyInput,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("need at least {needed} non-empty documents, found {found}")]
    TooFewDocuments { needed: usize, found: usize },
    #[error("vocabulary has {vocab} tokens, fewer than k = {k}")]
    DegenerateVocabulary { vocab: usize, k: usize },
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("unknown intent {0:?}")]
    UnknownIntent(String),
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("fraction {0} must be in (0, 0.5]")]
    FractionOutOfRange(f64),
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("no examples to export")]
    NothingToExport,
}
