//! Top-level error type and its mapping onto exit codes.

use serde::Serialize;
use thiserror::Error;

use crate::classify::ClassifyError;
use crate::config::ConfigError;
use crate::corpus::CorpusError;
use crate::diversity::DiversityError;
use crate::realism::RealismError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Realism(#[from] RealismError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{what}; {hint}")]
    MissingInput { what: String, hint: String },
    #[error("version '{version}': {source}")]
    Version {
        version: String,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Malformed input or configuration.
    Validation,
    /// A file could not be read or written.
    Io,
    /// Inputs are well formed but insufficient for the requested command.
    Precondition,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Validation => 2,
            Category::Io => 3,
            Category::Precondition => 4,
        }
    }
}

/// Machine-readable description of a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub category: Category,
    pub exit_code: i32,
    pub module: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conversation_id: Option<String>,
}

fn classify_category(e: &ClassifyError) -> Category {
    use ClassifyError::*;
    match e {
        Io { .. } => Category::Io,
        ClassWithoutExamples(_) => Category::Precondition,
        _ => Category::Validation,
    }
}

fn diversity_category(e: &DiversityError) -> Category {
    use DiversityError::*;
    match e {
        Classification { source, .. } => classify_category(source),
        Estimation { source, .. } => diversity_category(source),
        EmptyLabels | NoDimensions | NoVersions | EmptyDataset { .. } => Category::Precondition,
        _ => Category::Validation,
    }
}

fn realism_category(e: &RealismError) -> Category {
    use RealismError::*;
    match e {
        Io { .. } => Category::Io,
        Classify(inner) => classify_category(inner),
        InsufficientPool { .. }
        | OverlappingPools(_)
        | MissingJudgment(_)
        | SingleClassLabels(_)
        | EmptyBatch
        | TrainingOverlap(_) => Category::Precondition,
        _ => Category::Validation,
    }
}

fn classify_conversation(e: &ClassifyError) -> Option<&str> {
    match e {
        ClassifyError::MissingAnnotation { id }
        | ClassifyError::OutOfVocabulary { id, .. }
        | ClassifyError::DuplicateAnnotation { id, .. } => Some(id),
        _ => None,
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Corpus(CorpusError::Io { .. }) => Category::Io,
            Error::Corpus(_) => Category::Validation,
            Error::Classify(e) => classify_category(e),
            Error::Diversity(e) => diversity_category(e),
            Error::Realism(e) => realism_category(e),
            Error::Config(ConfigError::Io { .. }) => Category::Io,
            Error::Config(_) => Category::Validation,
            Error::Io { .. } => Category::Io,
            Error::MissingInput { .. } => Category::Precondition,
            Error::Version { source, .. } => source.category(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    /// The toolkit module the failure originated in.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Classify(_) => "classify",
            Error::Diversity(_) => "diversity",
            Error::Realism(_) => "realism",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::MissingInput { .. } => "pipeline",
            Error::Version { source, .. } => source.module(),
        }
    }

    pub fn version(&self) -> Option<&str> {
        match self {
            Error::Version { version, .. } => Some(version),
            Error::Diversity(
                DiversityError::Classification { version, .. }
                | DiversityError::Estimation { version, .. }
                | DiversityError::EmptyDataset { version },
            ) => Some(version),
            _ => None,
        }
    }

    pub fn conversation_id(&self) -> Option<&str> {
        match self {
            Error::Version { source, .. } => source.conversation_id(),
            Error::Corpus(CorpusError::DuplicateId { id, .. }) => Some(id),
            Error::Classify(e) | Error::Realism(RealismError::Classify(e)) => {
                classify_conversation(e)
            }
            Error::Diversity(DiversityError::Classification { source, .. }) => {
                classify_conversation(source)
            }
            Error::Diversity(DiversityError::UnknownLabel { id, .. }) => Some(id),
            Error::Realism(
                RealismError::OverlappingPools(id) | RealismError::TrainingOverlap(id),
            ) => Some(id),
            _ => None,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let category = self.category();
        ErrorReport {
            category,
            exit_code: category.exit_code(),
            module: self.module(),
            message: self.to_string(),
            version: self.version().map(str::to_string),
            conversation_id: self.conversation_id().map(str::to_string),
        }
    }

    pub(crate) fn in_version(self, version: &str) -> Error {
        match self {
            e @ Error::Version { .. } => e,
            e => Error::Version {
                version: version.to_string(),
                source: Box::new(e),
            },
        }
    }
}
