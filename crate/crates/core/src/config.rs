//! Evaluation configuration.
//!
//! The configuration file is TOML. Relative paths are resolved against the
//! directory that holds the file. Top-level keys must come before any table:
//!
//! ```toml
//! weights = [0.5, 0.5]              # optional, defaults to equal weights
//! entropy_base = "vocabulary_size"  # or { fixed = 2.0 }
//!
//! [versions]                        # generator version -> dataset file
//! A = "data/version_a.jsonl"
//! B = "data/version_b.jsonl"
//!
//! [[dimensions]]
//! name = "Sentiment"
//! vocabulary = ["Negative", "Positive"]
//! classifier = { lexicon = "lexicons/sentiment.json" }
//! scope = "user_only"               # optional: user_only | system_only | all
//!
//! [realism]                         # optional, every key has a default
//! human_pool = "data/human.jsonl"
//! simulated_pool = "data/version_a.jsonl"
//! n = 50
//! human_fraction = 0.5
//! seed = 0
//! smoothing = 1.0
//! holdout_fraction = 1.0
//! training_overlap = "exclude"      # exclude | reject | allow
//! discriminator = "out/discriminator.json"
//! batch = "out/batch-0-0123456789ab"
//! labels = "ratings.csv"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::{ClassifierSpec, ClassifyError, Dimension, DEFAULT_SMOOTHING};
use crate::corpus::TurnScope;
use crate::decimal;
use crate::diversity::{resolve_weights, DiversityError, EntropyBase};
use crate::realism::{OverlapPolicy, DEFAULT_BATCH_SIZE, DEFAULT_HUMAN_FRACTION};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{field}: file not found: {path}")]
    DanglingPath { field: String, path: String },
    #[error("weights: {0}")]
    Weights(#[source] DiversityError),
    #[error("dimensions: {0}")]
    Dimension(#[source] ClassifyError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    entropy_base: EntropyBase,
    #[serde(default)]
    versions: BTreeMap<String, PathBuf>,
    #[serde(default)]
    dimensions: Vec<RawDimension>,
    #[serde(default)]
    realism: RealismConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDimension {
    name: String,
    vocabulary: Vec<String>,
    classifier: ClassifierSpec,
    #[serde(default)]
    scope: Option<TurnScope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealismConfig {
    pub human_pool: Option<PathBuf>,
    pub simulated_pool: Option<PathBuf>,
    pub n: usize,
    pub human_fraction: f64,
    pub seed: u64,
    pub smoothing: f64,
    /// Fraction of each inference dataset, after removing training
    /// conversations, that the discriminator scores.
    pub holdout_fraction: f64,
    pub training_overlap: OverlapPolicy,
    pub discriminator: Option<PathBuf>,
    pub batch: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl Default for RealismConfig {
    fn default() -> Self {
        RealismConfig {
            human_pool: None,
            simulated_pool: None,
            n: DEFAULT_BATCH_SIZE,
            human_fraction: DEFAULT_HUMAN_FRACTION,
            seed: 0,
            smoothing: DEFAULT_SMOOTHING,
            holdout_fraction: 1.0,
            training_overlap: OverlapPolicy::default(),
            discriminator: None,
            batch: None,
            labels: None,
        }
    }
}

/// Fully resolved configuration: defaults applied, everything validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub versions: BTreeMap<String, PathBuf>,
    pub dimensions: Vec<Dimension>,
    #[serde(with = "decimal::vec_as_string")]
    pub weights: Vec<f64>,
    pub entropy_base: EntropyBase,
    pub realism: RealismConfig,
    /// Directory relative paths resolve against. Not part of the digest.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl EvalConfig {
    pub fn from_toml(text: &str, path: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;

        let dimensions = raw
            .dimensions
            .into_iter()
            .map(|d| Dimension::new(d.name, d.vocabulary, d.classifier, d.scope))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ConfigError::Dimension)?;
        let mut names: Vec<&str> = dimensions.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("dimensions", "dimension names must be distinct"));
        }

        let weights = if dimensions.is_empty() {
            match raw.weights {
                Some(w) if !w.is_empty() => {
                    return Err(ConfigError::Weights(DiversityError::WeightCountMismatch {
                        expected: 0,
                        found: w.len(),
                    }))
                }
                _ => Vec::new(),
            }
        } else {
            resolve_weights(dimensions.len(), raw.weights.as_deref())
                .map_err(ConfigError::Weights)?
        };
        raw.entropy_base
            .validate()
            .map_err(|e| invalid("entropy_base", e.to_string()))?;

        let r = &raw.realism;
        if r.n == 0 {
            return Err(invalid("realism.n", "must be positive"));
        }
        if !(0.0..=1.0).contains(&r.human_fraction) {
            return Err(invalid("realism.human_fraction", "must lie in [0, 1]"));
        }
        if !(r.smoothing.is_finite() && r.smoothing > 0.0) {
            return Err(invalid("realism.smoothing", "must be positive"));
        }
        if !(r.holdout_fraction > 0.0 && r.holdout_fraction <= 1.0) {
            return Err(invalid("realism.holdout_fraction", "must lie in (0, 1]"));
        }

        let config = EvalConfig {
            versions: raw.versions,
            dimensions,
            weights,
            entropy_base: raw.entropy_base,
            realism: raw.realism,
            base_dir: base_dir.to_path_buf(),
        };
        config.check_paths()?;
        Ok(config)
    }

    fn check_paths(&self) -> Result<(), ConfigError> {
        let mut refs: Vec<(String, &Path)> = Vec::new();
        for (v, p) in &self.versions {
            refs.push((format!("versions.{v}"), p));
        }
        for d in &self.dimensions {
            refs.push((
                format!("dimensions.{}.classifier", d.name),
                d.classifier.path(),
            ));
        }
        let r = &self.realism;
        for (field, p) in [
            ("realism.human_pool", &r.human_pool),
            ("realism.simulated_pool", &r.simulated_pool),
            ("realism.discriminator", &r.discriminator),
            ("realism.batch", &r.batch),
            ("realism.labels", &r.labels),
        ] {
            if let Some(p) = p {
                refs.push((field.to_string(), p));
            }
        }
        for (field, p) in refs {
            let resolved = self.resolve(p);
            if !resolved.exists() {
                return Err(ConfigError::DanglingPath {
                    field,
                    path: resolved.display().to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.realism.seed = seed;
        self
    }

    /// SHA-256 over the canonical JSON form of the resolved configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("sha256:{}", hex::encode(Sha256::digest(&canonical)))
    }
}

pub fn load_config(path: &Path) -> Result<EvalConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    EvalConfig::from_toml(&text, &path.display().to_string(), base_dir)
}
