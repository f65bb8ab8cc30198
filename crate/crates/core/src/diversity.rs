//! Shannon entropy of per-dimension label distributions and the weighted
//! entropy score used to rank generator versions.
//!
//! For a distribution `p` over a vocabulary of `n` labels,
//! `H = sum_i p_i * log_b(1 / p_i)` with `0 * log(1/0) = 0`. The default base
//! is `b = n`, which bounds `H` to `[0, 1]` and makes dimensions with
//! different vocabulary sizes comparable before they are weighted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::classify::{classify_dataset, ClassifyError, Dimension, DimensionClassifier, LabelMap};
use crate::corpus::Dataset;
use crate::decimal;

/// Absolute tolerance on the sum of dimension weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("no labels to estimate a distribution from")]
    EmptyLabels,
    #[error("conversation '{id}': label '{label}' is not in the vocabulary")]
    UnknownLabel { id: String, label: String },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("expected {expected} label counts, got {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("logarithm base must be greater than 1, got {0}")]
    InvalidBase(f64),
    #[error("no dimensions to score")]
    NoDimensions,
    #[error("expected {expected} weights, got {found}")]
    WeightCountMismatch { expected: usize, found: usize },
    #[error("weight {index} is negative ({weight})")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("no generator versions to compare")]
    NoVersions,
    #[error("version '{version}': dataset is empty")]
    EmptyDataset { version: String },
    #[error("version '{version}', dimension '{dimension}': {source}")]
    Classification {
        version: String,
        dimension: String,
        #[source]
        source: Box<ClassifyError>,
    },
    #[error("version '{version}', dimension '{dimension}': {source}")]
    Estimation {
        version: String,
        dimension: String,
        #[source]
        source: Box<DiversityError>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyBase {
    /// Logarithm base equal to the vocabulary size; entropy lands in [0, 1].
    #[default]
    VocabularySize,
    Fixed(f64),
}

impl EntropyBase {
    pub fn validate(&self) -> Result<(), DiversityError> {
        match *self {
            EntropyBase::Fixed(b) if !(b.is_finite() && b > 1.0) => {
                Err(DiversityError::InvalidBase(b))
            }
            _ => Ok(()),
        }
    }
}

/// Empirical label frequencies over an ordered vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    vocabulary: Vec<String>,
    counts: Vec<u64>,
    #[serde(with = "decimal::vec_as_string")]
    probabilities: Vec<f64>,
    support_count: u64,
}

impl LabelDistribution {
    /// Builds a distribution from raw per-label counts.
    pub fn from_counts(vocabulary: Vec<String>, counts: Vec<u64>) -> Result<Self, DiversityError> {
        if vocabulary.is_empty() {
            return Err(DiversityError::EmptyVocabulary);
        }
        if counts.len() != vocabulary.len() {
            return Err(DiversityError::CountMismatch {
                expected: vocabulary.len(),
                found: counts.len(),
            });
        }
        let support_count: u64 = counts.iter().sum();
        if support_count == 0 {
            return Err(DiversityError::EmptyLabels);
        }
        let probabilities = counts
            .iter()
            .map(|&c| c as f64 / support_count as f64)
            .collect();
        Ok(LabelDistribution {
            vocabulary,
            counts,
            probabilities,
            support_count,
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn support_count(&self) -> u64 {
        self.support_count
    }

    /// The same distribution with labels (and their counts) reordered.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, DiversityError> {
        LabelDistribution::from_counts(
            order.iter().map(|&i| self.vocabulary[i].clone()).collect(),
            order.iter().map(|&i| self.counts[i]).collect(),
        )
    }
}

/// Counts labels over `vocabulary`. Labels absent from the map count zero.
pub fn estimate_distribution(
    labels: &LabelMap,
    vocabulary: &[String],
) -> Result<LabelDistribution, DiversityError> {
    if labels.is_empty() {
        return Err(DiversityError::EmptyLabels);
    }
    let mut counts = vec![0u64; vocabulary.len()];
    for (id, label) in labels {
        let i = vocabulary.iter().position(|v| v == label).ok_or_else(|| {
            DiversityError::UnknownLabel {
                id: id.clone(),
                label: label.clone(),
            }
        })?;
        counts[i] += 1;
    }
    LabelDistribution::from_counts(vocabulary.to_vec(), counts)
}

/// Shannon entropy of raw probabilities in base `base`.
pub fn entropy(probabilities: &[f64], base: f64) -> f64 {
    let nats: f64 = probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * (1.0 / p).ln())
        .sum();
    nats / base.ln()
}

pub fn shannon_entropy(dist: &LabelDistribution, base: EntropyBase) -> Result<f64, DiversityError> {
    base.validate()?;
    Ok(match base {
        EntropyBase::Fixed(b) => entropy(&dist.probabilities, b),
        EntropyBase::VocabularySize => {
            let n = dist.vocabulary.len();
            if n < 2 {
                0.0
            } else {
                // rounding can leave a uniform distribution a hair above 1
                entropy(&dist.probabilities, n as f64).min(1.0)
            }
        }
    })
}

/// Validated weights for `n` dimensions; `None` means equal weights.
pub fn resolve_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>, DiversityError> {
    if n == 0 {
        return Err(DiversityError::NoDimensions);
    }
    let weights = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0 / n as f64; n],
    };
    if weights.len() != n {
        return Err(DiversityError::WeightCountMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
    {
        return Err(DiversityError::NegativeWeight { index, weight });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(DiversityError::WeightSum(sum));
    }
    Ok(weights)
}

/// Weighted sum of per-dimension entropies.
pub fn entropy_score(entropies: &[f64], weights: Option<&[f64]>) -> Result<f64, DiversityError> {
    let weights = resolve_weights(entropies.len(), weights)?;
    Ok(weighted_sum(entropies, &weights))
}

fn weighted_sum(entropies: &[f64], weights: &[f64]) -> f64 {
    entropies
        .iter()
        .zip(weights)
        .fold(0.0, |acc, (h, a)| acc + a * h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEntropy {
    pub name: String,
    #[serde(with = "decimal::as_string")]
    pub entropy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<LabelDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub dimensions: Vec<DimensionEntropy>,
    #[serde(with = "decimal::vec_as_string")]
    pub weights: Vec<f64>,
    #[serde(with = "decimal::as_string")]
    pub entropy_score: f64,
}

impl EntropyReport {
    pub fn new(
        dimensions: Vec<DimensionEntropy>,
        weights: Option<&[f64]>,
    ) -> Result<Self, DiversityError> {
        let weights = resolve_weights(dimensions.len(), weights)?;
        let entropies: Vec<f64> = dimensions.iter().map(|d| d.entropy).collect();
        let entropy_score = weighted_sum(&entropies, &weights);
        Ok(EntropyReport {
            dimensions,
            weights,
            entropy_score,
        })
    }

    /// Report built straight from entropy values, without distributions.
    pub fn from_entropies<S: Into<String>>(
        entropies: impl IntoIterator<Item = (S, f64)>,
        weights: Option<&[f64]>,
    ) -> Result<Self, DiversityError> {
        EntropyReport::new(
            entropies
                .into_iter()
                .map(|(name, entropy)| DimensionEntropy {
                    name: name.into(),
                    entropy,
                    distribution: None,
                })
                .collect(),
            weights,
        )
    }

    pub fn entropy_of(&self, dimension: &str) -> Option<f64> {
        self.dimensions
            .iter()
            .find(|d| d.name == dimension)
            .map(|d| d.entropy)
    }

    /// Summary with every real rounded half-even to six decimal places.
    pub fn to_rounded_json(&self) -> Value {
        let r = |x: f64| Value::String(decimal::round_half_even(x, 6));
        json!({
            "dimensions": self.dimensions.iter().map(|d| {
                let mut entry = json!({ "name": d.name, "entropy": r(d.entropy) });
                if let Some(dist) = &d.distribution {
                    entry["distribution"] = json!({
                        "vocabulary": dist.vocabulary,
                        "counts": dist.counts,
                        "probabilities": dist.probabilities.iter().map(|&p| r(p)).collect::<Vec<_>>(),
                        "support_count": dist.support_count,
                    });
                }
                entry
            }).collect::<Vec<_>>(),
            "weights": self.weights.iter().map(|&w| r(w)).collect::<Vec<_>>(),
            "entropy_score": r(self.entropy_score),
        })
    }
}

/// Entropy reports per generator version, plus their ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionComparison {
    pub rows: BTreeMap<String, EntropyReport>,
    pub ranking: Vec<String>,
}

impl VersionComparison {
    /// Ranks versions by entropy score, highest first; equal scores order by
    /// version name.
    pub fn from_reports(rows: BTreeMap<String, EntropyReport>) -> Result<Self, DiversityError> {
        if rows.is_empty() {
            return Err(DiversityError::NoVersions);
        }
        let mut ranking: Vec<String> = rows.keys().cloned().collect();
        ranking.sort_by(|a, b| {
            rows[b]
                .entropy_score
                .total_cmp(&rows[a].entropy_score)
                .then_with(|| a.cmp(b))
        });
        Ok(VersionComparison { rows, ranking })
    }

    pub fn ranked(&self) -> impl Iterator<Item = (&str, &EntropyReport)> {
        self.ranking.iter().map(|v| (v.as_str(), &self.rows[v]))
    }

    /// Dimension names of the first ranked report, in report order.
    pub fn dimension_names(&self) -> Vec<String> {
        self.ranked()
            .next()
            .map(|(_, r)| r.dimensions.iter().map(|d| d.name.clone()).collect())
            .unwrap_or_default()
    }

    pub fn to_rounded_json(&self) -> Value {
        json!({
            "rows": self.rows.iter().map(|(v, r)| (v.clone(), r.to_rounded_json())).collect::<serde_json::Map<_, _>>(),
            "ranking": self.ranking,
        })
    }
}

/// Scores one dataset along every dimension.
pub fn evaluate_dataset(
    version: &str,
    dataset: &Dataset,
    dimensions: &[(Dimension, DimensionClassifier)],
    weights: Option<&[f64]>,
    base: EntropyBase,
) -> Result<EntropyReport, DiversityError> {
    if dataset.is_empty() {
        return Err(DiversityError::EmptyDataset {
            version: version.to_string(),
        });
    }
    let mut entries = Vec::with_capacity(dimensions.len());
    for (dimension, classifier) in dimensions {
        let tag = |source: DiversityError| DiversityError::Estimation {
            version: version.to_string(),
            dimension: dimension.name.clone(),
            source: Box::new(source),
        };
        let labels = classify_dataset(dataset, dimension, classifier).map_err(|source| {
            DiversityError::Classification {
                version: version.to_string(),
                dimension: dimension.name.clone(),
                source: Box::new(source),
            }
        })?;
        let distribution = estimate_distribution(&labels, &dimension.vocabulary).map_err(tag)?;
        let entropy = shannon_entropy(&distribution, base).map_err(tag)?;
        entries.push(DimensionEntropy {
            name: dimension.name.clone(),
            entropy,
            distribution: Some(distribution),
        });
    }
    EntropyReport::new(entries, weights)
}

pub fn compare_versions(
    datasets: &BTreeMap<String, Dataset>,
    dimensions: &[(Dimension, DimensionClassifier)],
    weights: Option<&[f64]>,
    base: EntropyBase,
) -> Result<VersionComparison, DiversityError> {
    if datasets.is_empty() {
        return Err(DiversityError::NoVersions);
    }
    resolve_weights(dimensions.len(), weights)?;
    base.validate()?;
    let rows = datasets
        .iter()
        .map(|(version, dataset)| {
            evaluate_dataset(version, dataset, dimensions, weights, base)
                .map(|report| (version.clone(), report))
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    VersionComparison::from_reports(rows)
}
