//! Human-versus-simulated discriminator.
//!
//! Features are the session's lexical tokens plus bucketed structural
//! pseudo-tokens (turn count, average user-turn length, slate size per
//! system turn). Pseudo-tokens start with `__`, which the tokenizer can never
//! produce, so both kinds share one naive-Bayes bag.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    realism_score, RaterBatch, RaterLabels, RealismError, RealismMode, RealismReport, Verdict,
};
use crate::classify::{tokenize, train_nb, ClassifierModel};
use crate::corpus::{Conversation, Dataset, Source, Speaker};

/// Discriminator classes. Simulator-generated comes first so that an
/// uninformative model predicts it on ties.
pub const DISCRIMINATOR_VOCABULARY: [&str; 2] = ["simulator-generated", "human-generated"];

const FORMAT_TAG: &str = "convqual-discriminator";
const FORMAT_VERSION: u32 = 1;

fn turns_bucket(turns: usize) -> &'static str {
    match turns {
        0..=2 => "1-2",
        3..=4 => "3-4",
        5..=8 => "5-8",
        _ => "9+",
    }
}

/// Bucket of the mean user-turn length, compared as exact fractions.
fn avg_user_len_bucket(total_tokens: usize, user_turns: usize) -> &'static str {
    let n = user_turns.max(1);
    if total_tokens <= 5 * n {
        "1-5"
    } else if total_tokens <= 12 * n {
        "6-12"
    } else {
        "13+"
    }
}

fn slate_bucket(size: usize) -> &'static str {
    match size {
        0 => "0",
        1..=3 => "1-3",
        _ => "4+",
    }
}

pub fn extract_features(conversation: &Conversation) -> Vec<String> {
    let mut features = Vec::new();
    let mut user_tokens = 0;
    let mut user_turns = 0;
    for turn in conversation.turns() {
        let tokens = tokenize(&turn.text);
        if turn.speaker == Speaker::User {
            user_tokens += tokens.len();
            user_turns += 1;
        }
        features.extend(tokens);
    }
    features.push(format!(
        "__turns={}",
        turns_bucket(conversation.turns().len())
    ));
    features.push(format!(
        "__avg_user_len={}",
        avg_user_len_bucket(user_tokens, user_turns)
    ));
    for turn in conversation
        .turns()
        .iter()
        .filter(|t| t.speaker == Speaker::System)
    {
        features.push(format!("__slate_sizes={}", slate_bucket(turn.slate_len())));
    }
    features
}

fn vocabulary() -> Vec<String> {
    DISCRIMINATOR_VOCABULARY
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// A trained discriminator and the conversations it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    batch_id: String,
    training_ids: BTreeSet<String>,
    model: ClassifierModel,
}

/// What to do when inference data overlaps the training batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// Drop training conversations before scoring.
    #[default]
    Exclude,
    /// Fail if any training conversation is present.
    Reject,
    /// Score everything.
    Allow,
}

/// Trains on rater judgments, not on the batch's hidden provenance.
pub fn train_discriminator(
    batch: &RaterBatch,
    labels: &RaterLabels,
    smoothing: f64,
) -> Result<Discriminator, RealismError> {
    labels.check_against(batch)?;
    for verdict in [Verdict::HumanGenerated, Verdict::SimulatorGenerated] {
        if labels.count(verdict) == labels.judgments().len() {
            return Err(RealismError::SingleClassLabels(verdict));
        }
    }
    let examples: Vec<(Vec<String>, String)> = batch
        .items()
        .iter()
        .map(|item| {
            (
                extract_features(&item.conversation),
                labels.judgments()[&item.index].as_str().to_string(),
            )
        })
        .collect();
    let model = train_nb(&examples, &vocabulary(), smoothing)?;
    Ok(Discriminator {
        batch_id: batch.batch_id().to_string(),
        training_ids: batch.conversation_ids(),
        model,
    })
}

/// Counts conversations the model predicts human-generated.
pub fn realism_inferred(
    model: &ClassifierModel,
    batch: &Dataset,
) -> Result<RealismReport, RealismError> {
    if model.vocabulary() != vocabulary().as_slice() {
        return Err(RealismError::WrongVocabulary(model.vocabulary().to_vec()));
    }
    if batch.is_empty() {
        return Err(RealismError::EmptyBatch);
    }
    let mut h = 0u64;
    let mut correct = 0u64;
    let mut known = 0u64;
    let mut verdicts = std::collections::BTreeMap::new();
    for c in batch.conversations() {
        let prediction = model.predict(&extract_features(c));
        let verdict = if prediction.index == 1 {
            Verdict::HumanGenerated
        } else {
            Verdict::SimulatorGenerated
        };
        if verdict == Verdict::HumanGenerated {
            h += 1;
        }
        let truth = match c.source() {
            Source::Human => Some(Verdict::HumanGenerated),
            Source::Simulated => Some(Verdict::SimulatorGenerated),
            Source::Unknown => None,
        };
        if let Some(truth) = truth {
            known += 1;
            if truth == verdict {
                correct += 1;
            }
        }
        verdicts.insert(c.id().to_string(), verdict);
    }
    let n = batch.len() as u64;
    let accuracy_vs_provenance = if known == n {
        Some(realism_score(correct, n)?)
    } else {
        None
    };
    Ok(RealismReport {
        mode: RealismMode::Inferred,
        subject: batch.source_path().to_string(),
        h,
        n,
        score: realism_score(h, n)?,
        verdicts,
        accuracy_vs_provenance,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscriminatorFile {
    format: String,
    format_version: u32,
    batch_id: String,
    training_ids: BTreeSet<String>,
    model: Value,
}

impl Discriminator {
    pub fn model(&self) -> &ClassifierModel {
        &self.model
    }

    pub fn batch_id(&self) -> &str {
        &self.batch_id
    }

    pub fn training_ids(&self) -> &BTreeSet<String> {
        &self.training_ids
    }

    /// The part of `dataset` that may be scored under `policy`.
    pub fn scoring_set(
        &self,
        dataset: &Dataset,
        policy: OverlapPolicy,
    ) -> Result<Dataset, RealismError> {
        match policy {
            OverlapPolicy::Allow => Ok(dataset.clone()),
            OverlapPolicy::Exclude => Ok(dataset.filtered(|c| !self.training_ids.contains(c.id()))),
            OverlapPolicy::Reject => {
                if let Some(c) = dataset
                    .conversations()
                    .iter()
                    .find(|c| self.training_ids.contains(c.id()))
                {
                    return Err(RealismError::TrainingOverlap(c.id().to_string()));
                }
                Ok(dataset.clone())
            }
        }
    }

    /// Scores `dataset` after applying `policy` to training conversations.
    pub fn infer(
        &self,
        dataset: &Dataset,
        subject: &str,
        policy: OverlapPolicy,
    ) -> Result<RealismReport, RealismError> {
        let mut report = realism_inferred(&self.model, &self.scoring_set(dataset, policy)?)?;
        report.subject = subject.to_string();
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        let file = DiscriminatorFile {
            format: FORMAT_TAG.to_string(),
            format_version: FORMAT_VERSION,
            batch_id: self.batch_id.clone(),
            training_ids: self.training_ids.clone(),
            model: serde_json::from_str(&self.model.to_json()).expect("model JSON is valid"),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("discriminator serializes");
        json.push('\n');
        json
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: DiscriminatorFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format != FORMAT_TAG {
            return Err(format!("unexpected format tag '{}'", file.format));
        }
        if file.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported discriminator format version {}",
                file.format_version
            ));
        }
        let model = ClassifierModel::from_json(&file.model.to_string())?;
        if model.vocabulary() != vocabulary().as_slice() {
            return Err(format!(
                "model vocabulary {:?} is not the realism vocabulary",
                model.vocabulary()
            ));
        }
        Ok(Discriminator {
            batch_id: file.batch_id,
            training_ids: file.training_ids,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RealismError> {
        std::fs::write(path, self.to_json()).map_err(|source| RealismError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RealismError> {
        let text = std::fs::read_to_string(path).map_err(|source| RealismError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Discriminator::from_json(&text).map_err(|reason| RealismError::Format {
            path: path.display().to_string(),
            reason,
        })
    }
}
