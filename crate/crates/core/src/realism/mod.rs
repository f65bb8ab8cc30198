//! Realism scoring: how many conversations pass as human-generated.
//!
//! Two routes produce the same ratio `h / N`:
//!
//! * human raters judge a blinded, shuffled mixture of human and simulated
//!   conversations ([`sample_rater_batch`], [`realism_human`]);
//! * a naive-Bayes discriminator trained on those rater judgments predicts
//!   the verdict for unseen conversations ([`train_discriminator`],
//!   [`realism_inferred`]).
//!
//! The human-rated score is computed over the whole mixed batch, so a
//! perfect simulator judged by a truthful rater scores close to the human
//! fraction of the batch, not 1. Reports therefore also carry the agreement
//! with true provenance when it is known.

mod batch;
mod discriminator;
mod labels;

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::ClassifyError;
use crate::decimal;

pub use batch::{
    audit_blinded_items, export_batch, holdout_subset, load_batch, sample_rater_batch, BatchExport,
    BatchItem, RaterBatch, DEFAULT_BATCH_SIZE, DEFAULT_HUMAN_FRACTION, INSTRUCTIONS_FILE,
    ITEMS_FILE,
};
pub use discriminator::{
    extract_features, realism_inferred, train_discriminator, Discriminator, OverlapPolicy,
    DISCRIMINATOR_VOCABULARY,
};
pub use labels::{load_labels, read_labels, RaterLabels};

#[derive(Debug, Error)]
pub enum RealismError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("batch size must be positive")]
    InvalidBatchSize,
    #[error("human fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("{pool} pool has {available} conversations but {needed} are required")]
    InsufficientPool {
        pool: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("conversation '{0}' appears in both the human and simulated pools")]
    OverlappingPools(String),
    #[error("labels are for batch '{found}' but the batch is '{expected}'")]
    BatchIdMismatch { expected: String, found: String },
    #[error("no judgment for item {0}")]
    MissingJudgment(usize),
    #[error("judgment for item {index}, but the batch has only {size} items")]
    UnknownItem { index: usize, size: usize },
    #[error("item {0} is judged more than once")]
    DuplicateJudgment(usize),
    #[error("every item is judged {0}; the discriminator needs both classes")]
    SingleClassLabels(Verdict),
    #[error("no conversations to score")]
    EmptyBatch,
    #[error("h = {h} exceeds N = {n}")]
    CountOutOfRange { h: u64, n: u64 },
    #[error("model vocabulary {0:?} is not the realism vocabulary")]
    WrongVocabulary(Vec<String>),
    #[error("conversation '{0}' was used to train the discriminator")]
    TrainingOverlap(String),
    #[error("blinded export leaks metadata: {}", .0.join("; "))]
    BlindingViolation(Vec<String>),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// A rater's or discriminator's call on one conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "simulator-generated")]
    SimulatorGenerated,
    #[serde(rename = "human-generated")]
    HumanGenerated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SimulatorGenerated => "simulator-generated",
            Verdict::HumanGenerated => "human-generated",
        }
    }

    pub fn parse(text: &str) -> Option<Verdict> {
        match text.trim() {
            "simulator-generated" => Some(Verdict::SimulatorGenerated),
            "human-generated" => Some(Verdict::HumanGenerated),
            _ => None,
        }
    }

    fn matches(self, truth: Provenance) -> bool {
        matches!(
            (self, truth),
            (Verdict::HumanGenerated, Provenance::Human)
                | (Verdict::SimulatorGenerated, Provenance::Simulated)
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True origin of a conversation in a rater batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Human,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealismMode {
    HumanRated,
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealismReport {
    pub mode: RealismMode,
    /// What was scored: a batch id or a generator version.
    pub subject: String,
    /// Conversations judged or predicted human-generated.
    pub h: u64,
    pub n: u64,
    #[serde(with = "decimal::as_string")]
    pub score: f64,
    pub verdicts: BTreeMap<String, Verdict>,
    #[serde(default, with = "decimal::opt_as_string")]
    pub accuracy_vs_provenance: Option<f64>,
}

/// `h / n`, computed from the exact integers and converted once.
pub fn realism_score(h: u64, n: u64) -> Result<f64, RealismError> {
    if n == 0 {
        return Err(RealismError::EmptyBatch);
    }
    if h > n {
        return Err(RealismError::CountOutOfRange { h, n });
    }
    Ok(h as f64 / n as f64)
}

/// Scores a rated batch from the raters' judgments.
pub fn realism_human(
    labels: &RaterLabels,
    batch: &RaterBatch,
) -> Result<RealismReport, RealismError> {
    labels.check_against(batch)?;
    let mut h = 0u64;
    let mut correct = 0u64;
    let mut verdicts = BTreeMap::new();
    for item in batch.items() {
        let verdict = labels.judgments()[&item.index];
        if verdict == Verdict::HumanGenerated {
            h += 1;
        }
        if verdict.matches(batch.hidden_key()[&item.index]) {
            correct += 1;
        }
        verdicts.insert(item.conversation.id().to_string(), verdict);
    }
    let n = batch.len() as u64;
    Ok(RealismReport {
        mode: RealismMode::HumanRated,
        subject: batch.batch_id().to_string(),
        h,
        n,
        score: realism_score(h, n)?,
        verdicts,
        accuracy_vs_provenance: Some(realism_score(correct, n)?),
    })
}
