//! Session classifiers for evaluation dimensions.
//!
//! A [`Dimension`] names an axis such as sentiment or topic, fixes its closed
//! label vocabulary, and says how each session gets a label: a keyword
//! lexicon, a trained naive-Bayes model, or labels produced elsewhere and
//! imported from CSV.

mod lexicon;
mod naive_bayes;
mod tokenize;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{session_text, Dataset, TurnScope};

pub use lexicon::{classify_lexicon, classify_lexicon_index, Lexicon};
pub use naive_bayes::{predict_nb, train_nb, ClassifierModel, Prediction};
pub use tokenize::tokenize;

/// Conversation id to class label, ordered by id.
pub type LabelMap = BTreeMap<String, String>;

pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("dimension '{name}': {reason}")]
    InvalidDimension { name: String, reason: String },
    #[error("lexicon has no entry for class '{label}'")]
    LexiconMissingClass { label: String },
    #[error("dimension '{dimension}': model vocabulary {found:?} does not match {expected:?}")]
    VocabularyMismatch {
        dimension: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("annotations have no label for conversation '{id}'")]
    MissingAnnotation { id: String },
    #[error("conversation '{id}': label '{label}' is not in the vocabulary")]
    OutOfVocabulary { id: String, label: String },
    #[error("{path}: conversation '{id}' is annotated more than once")]
    DuplicateAnnotation { path: String, id: String },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary contains duplicate labels")]
    DuplicateLabel,
    #[error("smoothing must be a positive finite number, got {0}")]
    InvalidSmoothing(f64),
    #[error("training label '{0}' is not in the vocabulary")]
    UnknownLabel(String),
    #[error("class '{0}' has no training examples")]
    ClassWithoutExamples(String),
}

/// How sessions in a dimension are labelled. Paths may be relative to the
/// configuration file that declared them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSpec {
    Lexicon(PathBuf),
    NaiveBayes(PathBuf),
    External(PathBuf),
}

impl ClassifierSpec {
    pub fn path(&self) -> &Path {
        match self {
            ClassifierSpec::Lexicon(p)
            | ClassifierSpec::NaiveBayes(p)
            | ClassifierSpec::External(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub vocabulary: Vec<String>,
    pub classifier: ClassifierSpec,
    pub scope: TurnScope,
}

impl Dimension {
    pub fn new(
        name: impl Into<String>,
        vocabulary: Vec<String>,
        classifier: ClassifierSpec,
        scope: Option<TurnScope>,
    ) -> Result<Self, ClassifyError> {
        let name = name.into();
        let scope = scope.unwrap_or_else(|| Dimension::default_scope(&name));
        let d = Dimension {
            name,
            vocabulary,
            classifier,
            scope,
        };
        d.validate()?;
        Ok(d)
    }

    /// Sentiment reads what the user said; every other dimension reads the
    /// whole session.
    pub fn default_scope(name: &str) -> TurnScope {
        if name.eq_ignore_ascii_case("sentiment") {
            TurnScope::UserOnly
        } else {
            TurnScope::All
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let invalid = |reason: &str| ClassifyError::InvalidDimension {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name is empty"));
        }
        if self.vocabulary.len() < 2 {
            return Err(invalid("vocabulary needs at least two labels"));
        }
        if self.vocabulary.iter().any(|l| l.trim().is_empty()) {
            return Err(invalid("vocabulary contains an empty label"));
        }
        let mut sorted: Vec<_> = self.vocabulary.iter().collect();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.vocabulary.len() {
            return Err(invalid("vocabulary labels must be distinct"));
        }
        Ok(())
    }

    /// Loads whatever the classifier spec points at, resolving relative
    /// paths against `base_dir`.
    pub fn load_classifier(&self, base_dir: &Path) -> Result<DimensionClassifier, ClassifyError> {
        let path = base_dir.join(self.classifier.path());
        match &self.classifier {
            ClassifierSpec::Lexicon(_) => {
                let lexicon = Lexicon::load(&path)?;
                lexicon.check_covers(&self.vocabulary)?;
                Ok(DimensionClassifier::Lexicon(lexicon))
            }
            ClassifierSpec::NaiveBayes(_) => {
                let model = ClassifierModel::load(&path)?;
                if model.vocabulary() != self.vocabulary.as_slice() {
                    return Err(ClassifyError::VocabularyMismatch {
                        dimension: self.name.clone(),
                        expected: self.vocabulary.clone(),
                        found: model.vocabulary().to_vec(),
                    });
                }
                Ok(DimensionClassifier::NaiveBayes(model))
            }
            ClassifierSpec::External(_) => {
                Ok(DimensionClassifier::External(load_annotations(&path)?))
            }
        }
    }
}

/// A dimension's classifier, loaded and ready to label sessions.
#[derive(Debug, Clone)]
pub enum DimensionClassifier {
    Lexicon(Lexicon),
    NaiveBayes(ClassifierModel),
    External(LabelMap),
}

/// Assigns exactly one vocabulary label to every conversation.
pub fn classify_dataset(
    dataset: &Dataset,
    dimension: &Dimension,
    classifier: &DimensionClassifier,
) -> Result<LabelMap, ClassifyError> {
    let vocabulary = &dimension.vocabulary;
    let mut labels = LabelMap::new();
    for conversation in dataset.conversations() {
        let id = conversation.id();
        let label = match classifier {
            DimensionClassifier::Lexicon(lexicon) => {
                let text = session_text(conversation, dimension.scope);
                classify_lexicon(&text, lexicon, vocabulary).to_string()
            }
            DimensionClassifier::NaiveBayes(model) => {
                let tokens = tokenize(&session_text(conversation, dimension.scope));
                model.label(&model.predict(&tokens)).to_string()
            }
            DimensionClassifier::External(annotations) => {
                let label = annotations
                    .get(id)
                    .ok_or_else(|| ClassifyError::MissingAnnotation { id: id.to_string() })?;
                if !vocabulary.contains(label) {
                    return Err(ClassifyError::OutOfVocabulary {
                        id: id.to_string(),
                        label: label.clone(),
                    });
                }
                label.clone()
            }
        };
        labels.insert(id.to_string(), label);
    }
    Ok(labels)
}

/// Trains a naive-Bayes model for `dimension` from sessions that carry an
/// annotation. Sessions without one are ignored.
pub fn train_dimension_model(
    dataset: &Dataset,
    dimension: &Dimension,
    annotations: &LabelMap,
    smoothing: f64,
) -> Result<ClassifierModel, ClassifyError> {
    let mut examples = Vec::new();
    for c in dataset.conversations() {
        if let Some(label) = annotations.get(c.id()) {
            if !dimension.vocabulary.contains(label) {
                return Err(ClassifyError::OutOfVocabulary {
                    id: c.id().to_string(),
                    label: label.clone(),
                });
            }
            examples.push((tokenize(&session_text(c, dimension.scope)), label.clone()));
        }
    }
    train_nb(&examples, &dimension.vocabulary, smoothing)
}

#[derive(Deserialize)]
struct AnnotationRow {
    conversation_id: String,
    label: String,
}

/// Reads a `conversation_id,label` CSV with a header row.
pub fn load_annotations(path: &Path) -> Result<LabelMap, ClassifyError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| ClassifyError::Io {
        path: display.clone(),
        source,
    })?;
    read_annotations(file, &display)
}

pub fn read_annotations<R: io::Read>(reader: R, path: &str) -> Result<LabelMap, ClassifyError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut labels = LabelMap::new();
    for row in csv.deserialize::<AnnotationRow>() {
        let row = row.map_err(|e| ClassifyError::Format {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        if labels
            .insert(row.conversation_id.clone(), row.label)
            .is_some()
        {
            return Err(ClassifyError::DuplicateAnnotation {
                path: path.to_string(),
                id: row.conversation_id,
            });
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Conversation, Source, Turn};

    fn vocab(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    fn dataset(n: usize) -> Dataset {
        let conversations = (0..n)
            .map(|i| {
                let mood = if i % 3 == 0 {
                    "awful boring"
                } else {
                    "great fun"
                };
                Conversation::new(
                    format!("c{i}"),
                    Source::Simulated,
                    None,
                    vec![Turn::user(format!("that was {mood}")), Turn::system("ok")],
                )
                .unwrap()
            })
            .collect();
        Dataset::new(conversations, "mem").unwrap()
    }

    fn sentiment(classifier: ClassifierSpec) -> Dimension {
        Dimension::new(
            "Sentiment",
            vocab(&["Negative", "Positive"]),
            classifier,
            None,
        )
        .unwrap()
    }

    #[test]
    fn default_scopes() {
        let d = sentiment(ClassifierSpec::Lexicon("x".into()));
        assert_eq!(d.scope, TurnScope::UserOnly);
        let t = Dimension::new(
            "Topic",
            vocab(&["A", "B"]),
            ClassifierSpec::Lexicon("x".into()),
            None,
        )
        .unwrap();
        assert_eq!(t.scope, TurnScope::All);
    }

    #[test]
    fn dimension_validation() {
        let spec = ClassifierSpec::Lexicon("x".into());
        assert!(Dimension::new("D", vocab(&["A"]), spec.clone(), None).is_err());
        assert!(Dimension::new("D", vocab(&["A", "A"]), spec.clone(), None).is_err());
        assert!(Dimension::new("D", vocab(&["A", " "]), spec.clone(), None).is_err());
        assert!(Dimension::new("", vocab(&["A", "B"]), spec, None).is_err());
    }

    #[test]
    fn lexicon_labels_every_conversation() {
        let lex = Lexicon::new([
            ("Negative", vec!["awful", "boring"]),
            ("Positive", vec!["great", "fun"]),
        ]);
        let d = sentiment(ClassifierSpec::Lexicon("x".into()));
        let labels =
            classify_dataset(&dataset(10), &d, &DimensionClassifier::Lexicon(lex)).unwrap();
        assert_eq!(labels.len(), 10);
        assert!(labels.values().all(|l| d.vocabulary.contains(l)));
        assert_eq!(labels["c0"], "Negative");
        assert_eq!(labels["c1"], "Positive");
    }

    #[test]
    fn external_annotations_must_cover_every_id() {
        let d = sentiment(ClassifierSpec::External("x".into()));
        let mut annotations: LabelMap = (0..10)
            .map(|i| (format!("c{i}"), "Positive".to_string()))
            .collect();
        annotations.remove("c7");
        let err = classify_dataset(
            &dataset(10),
            &d,
            &DimensionClassifier::External(annotations),
        )
        .unwrap_err();
        assert!(matches!(err, ClassifyError::MissingAnnotation { ref id } if id == "c7"));
        assert!(err.to_string().contains("c7"));
    }

    #[test]
    fn external_labels_must_be_in_vocabulary() {
        let d = sentiment(ClassifierSpec::External("x".into()));
        let mut annotations: LabelMap = (0..3)
            .map(|i| (format!("c{i}"), "Positive".to_string()))
            .collect();
        annotations.insert("c1".into(), "Neutral".into());
        let err = classify_dataset(&dataset(3), &d, &DimensionClassifier::External(annotations))
            .unwrap_err();
        assert!(
            matches!(err, ClassifyError::OutOfVocabulary { ref label, .. } if label == "Neutral")
        );
    }

    #[test]
    fn annotation_csv_parsing() {
        let csv = "conversation_id,label\nc1, Positive\nc2,Negative\n";
        let m = read_annotations(csv.as_bytes(), "mem").unwrap();
        assert_eq!(m["c1"], "Positive");
        assert_eq!(m.len(), 2);

        let dup = "conversation_id,label\nc1,Positive\nc1,Negative\n";
        assert!(matches!(
            read_annotations(dup.as_bytes(), "mem"),
            Err(ClassifyError::DuplicateAnnotation { .. })
        ));
        assert!(read_annotations("id,lab\nc1,x\n".as_bytes(), "mem").is_err());
    }

    #[test]
    fn naive_bayes_dimension_round_trip() {
        let data = dataset(9);
        let d = sentiment(ClassifierSpec::NaiveBayes("x".into()));
        let annotations: LabelMap = data
            .conversations()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let l = if i % 3 == 0 { "Negative" } else { "Positive" };
                (c.id().to_string(), l.to_string())
            })
            .collect();
        let model = train_dimension_model(&data, &d, &annotations, DEFAULT_SMOOTHING).unwrap();
        let labels = classify_dataset(&data, &d, &DimensionClassifier::NaiveBayes(model)).unwrap();
        assert_eq!(labels, annotations);
    }

    #[test]
    fn classification_is_deterministic() {
        let lex = Lexicon::new([("Negative", vec!["awful"]), ("Positive", vec!["fun"])]);
        let d = sentiment(ClassifierSpec::Lexicon("x".into()));
        let c = DimensionClassifier::Lexicon(lex);
        let a = serde_json::to_string(&classify_dataset(&dataset(30), &d, &c).unwrap()).unwrap();
        let b = serde_json::to_string(&classify_dataset(&dataset(30), &d, &c).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
