//! Evaluation reports and their renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decimal::round_half_even_trimmed;
use crate::diversity::VersionComparison;
use crate::realism::{RealismMode, RealismReport};

/// Places shown in markdown tables.
pub const TABLE_PLACES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterBatchSummary {
    pub batch_id: String,
    pub seed: u64,
    pub size: usize,
    pub human_count: usize,
    pub items_dir: String,
    pub key_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub toolkit_version: String,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<VersionComparison>,
    #[serde(default)]
    pub realism: Vec<RealismReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rater_batch: Option<RaterBatchSummary>,
    /// Files written by the run, relative to the output directory.
    #[serde(default)]
    pub artifacts: Vec<String>,
    /// Skipped input lines and other non-fatal findings.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn new(config_digest: impl Into<String>) -> Self {
        EvalReport {
            toolkit_version: crate::TOOLKIT_VERSION.to_string(),
            config_digest: config_digest.into(),
            entropy: None,
            realism: Vec::new(),
            rater_batch: None,
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Machine,
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn cell(value: f64) -> String {
    round_half_even_trimmed(value, TABLE_PLACES)
}

/// The diversity table: one row per version in ranking order.
pub fn entropy_table(comparison: &VersionComparison) -> String {
    let names = comparison.dimension_names();
    let mut out = String::from("| Version |");
    for n in &names {
        let _ = write!(out, " H_{n} |");
    }
    out.push_str(" Entropy Score |\n|---|");
    for _ in &names {
        out.push_str("---|");
    }
    out.push_str("---|\n");
    for (version, row) in comparison.ranked() {
        let _ = write!(out, "| {version} |");
        for n in &names {
            let h = row.entropy_of(n).map(cell).unwrap_or_default();
            let _ = write!(out, " {h} |");
        }
        let _ = writeln!(out, " {} |", cell(row.entropy_score));
    }
    out
}

pub fn realism_table(reports: &[RealismReport]) -> String {
    let mut out = String::from(
        "| Subject | Mode | h | N | Realism Score | Agreement with provenance |\n|---|---|---|---|---|---|\n",
    );
    for r in reports {
        let mode = match r.mode {
            RealismMode::HumanRated => "human-rated",
            RealismMode::Inferred => "inferred",
        };
        let agreement = r
            .accuracy_vs_provenance
            .map(cell)
            .unwrap_or_else(|| "n/a".to_string());
        let _ = writeln!(
            out,
            "| {} | {mode} | {} | {} | {} | {agreement} |",
            r.subject,
            r.h,
            r.n,
            cell(r.score)
        );
    }
    out
}

fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::from("# Evaluation report\n\n");
    let _ = writeln!(out, "Toolkit version: {}", report.toolkit_version);
    let _ = writeln!(out, "Config digest: {}", report.config_digest);

    if let Some(comparison) = &report.entropy {
        out.push_str("\n## Diversity\n\n");
        out.push_str(&entropy_table(comparison));
        if let Some((_, row)) = comparison.ranked().next() {
            let weights: Vec<String> = row
                .dimensions
                .iter()
                .zip(&row.weights)
                .map(|(d, w)| format!("{} {}", d.name, round_half_even_trimmed(*w, 6)))
                .collect();
            let _ = writeln!(out, "\nWeights: {}", weights.join(", "));
        }
    }

    if !report.realism.is_empty() {
        out.push_str("\n## Realism\n\n");
        out.push_str(&realism_table(&report.realism));
    }

    if let Some(b) = &report.rater_batch {
        out.push_str("\n## Rater batch\n\n");
        let _ = writeln!(out, "Batch id: {}", b.batch_id);
        let _ = writeln!(out, "Seed: {}", b.seed);
        let _ = writeln!(out, "Items: {} ({} human)", b.size, b.human_count);
        let _ = writeln!(out, "Blinded export: {}", b.items_dir);
        let _ = writeln!(out, "Answer key: {}", b.key_path);
    }

    if !report.artifacts.is_empty() {
        out.push_str("\n## Files written\n\n");
        for a in &report.artifacts {
            let _ = writeln!(out, "- {a}");
        }
    }

    if !report.warnings.is_empty() {
        out.push_str("\n## Warnings\n\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}
