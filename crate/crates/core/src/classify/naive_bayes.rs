//! Multinomial naive Bayes with additive smoothing.
//!
//! The token universe is every token seen in training, across all classes.
//! For class `c` and token `t` in the universe:
//!
//! ```text
//! P(t | c) = (count(t, c) + s) / (tokens(c) + s * |universe|)
//! ```
//!
//! Tokens that never appeared in training carry no evidence for any class
//! and are skipped at prediction time.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::decimal;

const FORMAT_TAG: &str = "convqual-naive-bayes";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
struct ClassParams {
    documents: u64,
    token_total: u64,
    log_prior: f64,
    unseen_log_likelihood: f64,
    token_log_likelihoods: BTreeMap<String, f64>,
}

/// Trained parameters. Immutable; build with [`train_nb`] or load from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    vocabulary: Vec<String>,
    smoothing: f64,
    classes: Vec<ClassParams>,
    universe: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    /// Unnormalized log posterior per vocabulary class.
    pub log_posteriors: Vec<f64>,
}

pub fn train_nb<T: AsRef<[String]>>(
    examples: &[(T, String)],
    vocabulary: &[String],
    smoothing: f64,
) -> Result<ClassifierModel, ClassifyError> {
    if vocabulary.is_empty() {
        return Err(ClassifyError::EmptyVocabulary);
    }
    if !(smoothing.is_finite() && smoothing > 0.0) {
        return Err(ClassifyError::InvalidSmoothing(smoothing));
    }
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    if index.len() != vocabulary.len() {
        return Err(ClassifyError::DuplicateLabel);
    }

    let mut documents = vec![0u64; vocabulary.len()];
    let mut token_totals = vec![0u64; vocabulary.len()];
    let mut counts: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); vocabulary.len()];
    let mut universe = BTreeSet::new();

    for (tokens, label) in examples {
        let &c = index
            .get(label.as_str())
            .ok_or_else(|| ClassifyError::UnknownLabel(label.clone()))?;
        documents[c] += 1;
        for t in tokens.as_ref() {
            *counts[c].entry(t.clone()).or_default() += 1;
            token_totals[c] += 1;
            universe.insert(t.clone());
        }
    }
    if let Some(c) = documents.iter().position(|&d| d == 0) {
        return Err(ClassifyError::ClassWithoutExamples(vocabulary[c].clone()));
    }

    let total_docs: u64 = documents.iter().sum();
    let universe_size = universe.len() as f64;
    let classes = (0..vocabulary.len())
        .map(|c| {
            let denominator = token_totals[c] as f64 + smoothing * universe_size;
            ClassParams {
                documents: documents[c],
                token_total: token_totals[c],
                log_prior: (documents[c] as f64 / total_docs as f64).ln(),
                unseen_log_likelihood: (smoothing / denominator).ln(),
                token_log_likelihoods: counts[c]
                    .iter()
                    .map(|(t, &n)| (t.clone(), ((n as f64 + smoothing) / denominator).ln()))
                    .collect(),
            }
        })
        .collect();

    Ok(ClassifierModel {
        vocabulary: vocabulary.to_vec(),
        smoothing,
        classes,
        universe,
    })
}

/// Picks the class with the highest unnormalized log posterior; ties go to
/// the earlier vocabulary label. Tokens are counted before summing so the
/// result does not depend on token order.
pub fn predict_nb<T: AsRef<str>>(model: &ClassifierModel, tokens: &[T]) -> Prediction {
    let mut bag: BTreeMap<&str, u64> = BTreeMap::new();
    for t in tokens {
        let t = t.as_ref();
        if model.universe.contains(t) {
            *bag.entry(t).or_default() += 1;
        }
    }

    let log_posteriors: Vec<f64> = model
        .classes
        .iter()
        .map(|class| {
            bag.iter().fold(class.log_prior, |acc, (t, &n)| {
                let ll = class
                    .token_log_likelihoods
                    .get(*t)
                    .copied()
                    .unwrap_or(class.unseen_log_likelihood);
                acc + n as f64 * ll
            })
        })
        .collect();

    let mut index = 0;
    for (i, &score) in log_posteriors.iter().enumerate().skip(1) {
        if score > log_posteriors[index] {
            index = i;
        }
    }
    Prediction {
        index,
        log_posteriors,
    }
}

impl ClassifierModel {
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn token_universe_size(&self) -> usize {
        self.universe.len()
    }

    pub fn class_log_priors(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.log_prior).collect()
    }

    /// Log likelihood of `token` under class `class`, or `None` when the
    /// token is outside the training universe.
    pub fn token_log_likelihood(&self, class: usize, token: &str) -> Option<f64> {
        if !self.universe.contains(token) {
            return None;
        }
        let params = &self.classes[class];
        Some(
            params
                .token_log_likelihoods
                .get(token)
                .copied()
                .unwrap_or(params.unseen_log_likelihood),
        )
    }

    pub fn predict<T: AsRef<str>>(&self, tokens: &[T]) -> Prediction {
        predict_nb(self, tokens)
    }

    pub fn label(&self, prediction: &Prediction) -> &str {
        &self.vocabulary[prediction.index]
    }

    fn check(&self) -> Result<(), String> {
        let prior_mass: f64 = self.classes.iter().map(|c| c.log_prior.exp()).sum();
        if (prior_mass - 1.0).abs() > 1e-9 {
            return Err(format!("class priors sum to {prior_mass}, expected 1"));
        }
        if self.universe.is_empty() {
            return Ok(());
        }
        for (label, class) in self.vocabulary.iter().zip(&self.classes) {
            let seen: f64 = class.token_log_likelihoods.values().map(|l| l.exp()).sum();
            let unseen_count = self.universe.len() - class.token_log_likelihoods.len();
            let mass = seen + unseen_count as f64 * class.unseen_log_likelihood.exp();
            if (mass - 1.0).abs() > 1e-6 {
                return Err(format!(
                    "token likelihoods for class '{label}' sum to {mass}, expected 1"
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT_TAG.to_string(),
            format_version: FORMAT_VERSION,
            vocabulary: self.vocabulary.clone(),
            smoothing: self.smoothing,
            token_universe_size: self.universe.len(),
            classes: self
                .vocabulary
                .iter()
                .zip(&self.classes)
                .map(|(label, c)| ClassFile {
                    label: label.clone(),
                    documents: c.documents,
                    token_total: c.token_total,
                    log_prior: c.log_prior,
                    unseen_log_likelihood: c.unseen_log_likelihood,
                    token_log_likelihoods: c
                        .token_log_likelihoods
                        .iter()
                        .map(|(t, l)| (t.clone(), decimal::full(*l)))
                        .collect(),
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("model serializes");
        json.push('\n');
        json
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format != FORMAT_TAG {
            return Err(format!("unexpected format tag '{}'", file.format));
        }
        if file.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported model format version {}",
                file.format_version
            ));
        }
        if file.classes.len() != file.vocabulary.len()
            || file
                .classes
                .iter()
                .zip(&file.vocabulary)
                .any(|(c, l)| &c.label != l)
        {
            return Err("class entries do not match the vocabulary".into());
        }
        if !(file.smoothing.is_finite() && file.smoothing > 0.0) {
            return Err(format!("invalid smoothing {}", file.smoothing));
        }

        let mut universe = BTreeSet::new();
        let mut classes = Vec::with_capacity(file.classes.len());
        for c in file.classes {
            let mut lls = BTreeMap::new();
            for (t, l) in c.token_log_likelihoods {
                let v = decimal::parse(&l).map_err(|e| format!("token '{t}': {e}"))?;
                universe.insert(t.clone());
                lls.insert(t, v);
            }
            classes.push(ClassParams {
                documents: c.documents,
                token_total: c.token_total,
                log_prior: c.log_prior,
                unseen_log_likelihood: c.unseen_log_likelihood,
                token_log_likelihoods: lls,
            });
        }
        if universe.len() != file.token_universe_size {
            return Err(format!(
                "token_universe_size is {} but {} distinct tokens are present",
                file.token_universe_size,
                universe.len()
            ));
        }

        let model = ClassifierModel {
            vocabulary: file.vocabulary,
            smoothing: file.smoothing,
            classes,
            universe,
        };
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        std::fs::write(path, self.to_json()).map_err(|source| ClassifyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path).map_err(|source| ClassifyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ClassifierModel::from_json(&text).map_err(|reason| ClassifyError::Format {
            path: path.display().to_string(),
            reason,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    format_version: u32,
    vocabulary: Vec<String>,
    #[serde(with = "decimal::as_string")]
    smoothing: f64,
    token_universe_size: usize,
    classes: Vec<ClassFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassFile {
    label: String,
    documents: u64,
    token_total: u64,
    #[serde(with = "decimal::as_string")]
    log_prior: f64,
    #[serde(with = "decimal::as_string")]
    unseen_log_likelihood: f64,
    token_log_likelihoods: BTreeMap<String, String>,
}
