//! Runs evaluation commands against a resolved configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::EvalConfig;
use crate::corpus::{load_dataset, Dataset, ParseOptions};
use crate::diversity::compare_versions;
use crate::error::Error;
use crate::realism::{
    export_batch, holdout_subset, load_batch, load_labels, realism_human, realism_inferred,
    sample_rater_batch, train_discriminator, BatchExport, Discriminator, Provenance, RaterBatch,
    RaterLabels,
};
use crate::report::{EvalReport, RaterBatchSummary};

pub const ENTROPY_SUMMARY_FILE: &str = "entropy_summary.json";
pub const DISCRIMINATOR_FILE: &str = "discriminator.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Diversity,
    RealismSample,
    RealismScore,
    RealismTrain,
    RealismInfer,
    /// Diversity followed by discriminator inference.
    Full,
}

/// Per-run inputs that do not belong in the configuration file. Paths here
/// are used as given; configuration paths resolve against the config file.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub skip_invalid: bool,
    pub batch_dir: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub discriminator: Option<PathBuf>,
    /// Datasets to score with the discriminator. Empty means every
    /// configured version.
    pub datasets: Vec<PathBuf>,
}

impl RunContext {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunContext {
            out_dir: out_dir.into(),
            ..RunContext::default()
        }
    }
}

struct Run<'a> {
    config: &'a EvalConfig,
    ctx: &'a RunContext,
    report: EvalReport,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn missing(what: &str, hint: &str) -> Error {
    Error::MissingInput {
        what: what.to_string(),
        hint: hint.to_string(),
    }
}

const SAMPLE_FIRST: &str = "run `convqual realism sample`, collect rater labels, then \
    `convqual realism train`, or set realism.batch and realism.labels";

impl Run<'_> {
    fn out_path(&self, name: &str) -> PathBuf {
        self.ctx.out_dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Error> {
        let path = self.out_path(name);
        fs::write(&path, contents).map_err(io_error(&path))?;
        self.report.artifacts.push(name.to_string());
        Ok(())
    }

    fn load(&mut self, path: &Path) -> Result<Dataset, Error> {
        let parsed = load_dataset(
            path,
            ParseOptions {
                skip_invalid: self.ctx.skip_invalid,
            },
        )?;
        self.report.warnings.extend(parsed.warnings);
        Ok(parsed.dataset)
    }

    fn load_versions(&mut self) -> Result<BTreeMap<String, Dataset>, Error> {
        let mut out = BTreeMap::new();
        for (version, path) in &self.config.versions {
            let dataset = self
                .load(&self.config.resolve(path))
                .map_err(|e| e.in_version(version))?;
            out.insert(version.clone(), dataset);
        }
        Ok(out)
    }

    fn batch_dir(&self) -> Option<PathBuf> {
        self.ctx.batch_dir.clone().or_else(|| {
            self.config
                .realism
                .batch
                .as_deref()
                .map(|p| self.config.resolve(p))
        })
    }

    fn labels_path(&self) -> Option<PathBuf> {
        self.ctx.labels.clone().or_else(|| {
            self.config
                .realism
                .labels
                .as_deref()
                .map(|p| self.config.resolve(p))
        })
    }

    fn discriminator_path(&self) -> Option<PathBuf> {
        self.ctx.discriminator.clone().or_else(|| {
            self.config
                .realism
                .discriminator
                .as_deref()
                .map(|p| self.config.resolve(p))
        })
    }

    fn has_rated_batch(&self) -> bool {
        self.batch_dir().is_some() && self.labels_path().is_some()
    }

    fn rated_batch(&self) -> Result<(RaterBatch, RaterLabels), Error> {
        let dir = self
            .batch_dir()
            .ok_or_else(|| missing("no rater batch given", SAMPLE_FIRST))?;
        let labels = self
            .labels_path()
            .ok_or_else(|| missing("no rater labels given", SAMPLE_FIRST))?;
        let batch = load_batch(&BatchExport::for_dir(&dir))?;
        let labels = load_labels(&labels, batch.batch_id())?;
        Ok((batch, labels))
    }

    fn diversity(&mut self) -> Result<(), Error> {
        let datasets = self.load_versions()?;
        let mut dimensions = Vec::with_capacity(self.config.dimensions.len());
        for d in &self.config.dimensions {
            dimensions.push((d.clone(), d.load_classifier(&self.config.base_dir)?));
        }
        let comparison = compare_versions(
            &datasets,
            &dimensions,
            Some(&self.config.weights),
            self.config.entropy_base,
        )?;
        let summary = serde_json::to_string_pretty(&comparison.to_rounded_json())
            .expect("summary serializes");
        self.write(ENTROPY_SUMMARY_FILE, &(summary + "\n"))?;
        self.report.entropy = Some(comparison);
        Ok(())
    }

    fn sample(&mut self) -> Result<(), Error> {
        let r = &self.config.realism;
        let hint = "set realism.human_pool and realism.simulated_pool in the configuration";
        let human = r
            .human_pool
            .as_deref()
            .ok_or_else(|| missing("no human pool configured", hint))?;
        let simulated = r
            .simulated_pool
            .as_deref()
            .ok_or_else(|| missing("no simulated pool configured", hint))?;
        let human = self.load(&self.config.resolve(human))?;
        let simulated = self.load(&self.config.resolve(simulated))?;
        let batch = sample_rater_batch(&human, &simulated, r.n, r.human_fraction, r.seed)?;
        let export = export_batch(&batch, &self.ctx.out_dir)?;

        let relative = |p: &Path| {
            p.strip_prefix(&self.ctx.out_dir)
                .unwrap_or(p)
                .display()
                .to_string()
        };
        let items_dir = relative(&export.dir);
        let key_path = relative(&export.key_path);
        self.report.artifacts.push(items_dir.clone());
        self.report.artifacts.push(key_path.clone());
        self.report.rater_batch = Some(RaterBatchSummary {
            batch_id: batch.batch_id().to_string(),
            seed: batch.seed(),
            size: batch.len(),
            human_count: batch
                .hidden_key()
                .values()
                .filter(|p| **p == Provenance::Human)
                .count(),
            items_dir,
            key_path,
        });
        Ok(())
    }

    fn score(&mut self) -> Result<(), Error> {
        let (batch, labels) = self.rated_batch()?;
        self.report.realism.push(realism_human(&labels, &batch)?);
        Ok(())
    }

    fn train(&mut self) -> Result<Discriminator, Error> {
        let (batch, labels) = self.rated_batch()?;
        let discriminator = train_discriminator(&batch, &labels, self.config.realism.smoothing)?;
        self.write(DISCRIMINATOR_FILE, &discriminator.to_json())?;
        Ok(discriminator)
    }

    fn discriminator(&mut self) -> Result<Discriminator, Error> {
        match self.discriminator_path() {
            Some(path) => Ok(Discriminator::load(&path)?),
            None if self.has_rated_batch() => self.train(),
            None => Err(missing(
                "no trained discriminator and no rated batch",
                SAMPLE_FIRST,
            )),
        }
    }

    fn infer(&mut self) -> Result<(), Error> {
        let discriminator = self.discriminator()?;
        let mut targets: Vec<(String, Dataset)> = Vec::new();
        if self.ctx.datasets.is_empty() {
            targets.extend(self.load_versions()?);
        } else {
            for path in &self.ctx.datasets {
                targets.push((path.display().to_string(), self.load(path)?));
            }
        }
        if targets.is_empty() {
            return Err(missing(
                "nothing to score",
                "configure [versions] or pass datasets to score",
            ));
        }
        let r = &self.config.realism;
        for (subject, dataset) in targets {
            let scoring = discriminator
                .scoring_set(&dataset, r.training_overlap)
                .and_then(|d| holdout_subset(&d, r.holdout_fraction, r.seed))
                .and_then(|d| realism_inferred(discriminator.model(), &d));
            let mut report = scoring.map_err(|e| Error::from(e).in_version(&subject))?;
            report.subject = subject;
            self.report.realism.push(report);
        }
        Ok(())
    }
}

/// Executes `command`, writing artifacts under `ctx.out_dir`.
pub fn run_eval(
    config: &EvalConfig,
    command: Command,
    ctx: &RunContext,
) -> Result<EvalReport, Error> {
    fs::create_dir_all(&ctx.out_dir).map_err(io_error(&ctx.out_dir))?;
    let mut run = Run {
        config,
        ctx,
        report: EvalReport::new(config.digest()),
    };
    match command {
        Command::Diversity => run.diversity()?,
        Command::RealismSample => run.sample()?,
        Command::RealismScore => run.score()?,
        Command::RealismTrain => {
            run.train()?;
        }
        Command::RealismInfer => run.infer()?,
        Command::Full => {
            if run.discriminator_path().is_none() && !run.has_rated_batch() {
                return Err(missing(
                    "no trained discriminator and no rated batch",
                    SAMPLE_FIRST,
                ));
            }
            run.diversity()?;
            run.infer()?;
        }
    }
    Ok(run.report)
}
