use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::Deserialize;

use super::{RaterBatch, RealismError, Verdict};

/// One rater's judgments for a batch, keyed by item index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterLabels {
    batch_id: String,
    judgments: BTreeMap<usize, Verdict>,
}

impl RaterLabels {
    pub fn from_judgments(
        batch_id: impl Into<String>,
        judgments: impl IntoIterator<Item = (usize, Verdict)>,
    ) -> Result<Self, RealismError> {
        let mut map = BTreeMap::new();
        for (index, verdict) in judgments {
            if map.insert(index, verdict).is_some() {
                return Err(RealismError::DuplicateJudgment(index));
            }
        }
        Ok(RaterLabels {
            batch_id: batch_id.into(),
            judgments: map,
        })
    }

    pub fn batch_id(&self) -> &str {
        &self.batch_id
    }

    pub fn judgments(&self) -> &BTreeMap<usize, Verdict> {
        &self.judgments
    }

    /// Requires exactly one judgment for every item index of `batch`.
    pub fn check_against(&self, batch: &RaterBatch) -> Result<(), RealismError> {
        if self.batch_id != batch.batch_id() {
            return Err(RealismError::BatchIdMismatch {
                expected: batch.batch_id().to_string(),
                found: self.batch_id.clone(),
            });
        }
        let size = batch.len();
        if let Some(&index) = self.judgments.keys().find(|&&i| i >= size) {
            return Err(RealismError::UnknownItem { index, size });
        }
        if let Some(missing) = (0..size).find(|i| !self.judgments.contains_key(i)) {
            return Err(RealismError::MissingJudgment(missing));
        }
        Ok(())
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.judgments.values().filter(|v| **v == verdict).count()
    }
}

#[derive(Deserialize)]
struct LabelRow {
    item_index: usize,
    judgment: String,
    #[serde(default)]
    batch_id: Option<String>,
}

/// Reads an `item_index,judgment` CSV. An optional `batch_id` column, when
/// present, must agree with `batch_id` on every row.
pub fn read_labels<R: io::Read>(
    reader: R,
    path: &str,
    batch_id: &str,
) -> Result<RaterLabels, RealismError> {
    let format = |reason: String| RealismError::Format {
        path: path.to_string(),
        reason,
    };
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut judgments = Vec::new();
    for (n, row) in csv.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(|e| format(e.to_string()))?;
        let verdict = Verdict::parse(&row.judgment).ok_or_else(|| {
            format(format!(
                "row {}: judgment '{}' must be human-generated or simulator-generated",
                n + 1,
                row.judgment
            ))
        })?;
        if let Some(found) = row.batch_id.filter(|b| !b.is_empty()) {
            if found != batch_id {
                return Err(RealismError::BatchIdMismatch {
                    expected: batch_id.to_string(),
                    found,
                });
            }
        }
        judgments.push((row.item_index, verdict));
    }
    RaterLabels::from_judgments(batch_id, judgments)
}

pub fn load_labels(path: &Path, batch_id: &str) -> Result<RaterLabels, RealismError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| RealismError::Io {
        path: display.clone(),
        source,
    })?;
    read_labels(file, &display, batch_id)
}
