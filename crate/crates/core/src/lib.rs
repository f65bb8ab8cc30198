//! Quality metrics for synthetic conversational-recommender datasets.
//!
//! * [`diversity`]: weighted Shannon entropy of session labels across
//!   dimensions such as sentiment and topic.
//! * [`realism`]: the share of conversations that pass as human-generated,
//!   from human raters or from a discriminator trained on their judgments.

pub mod classify;
pub mod config;
pub mod corpus;
pub mod decimal;
pub mod diversity;
pub mod error;
pub mod pipeline;
pub mod realism;
pub mod report;

pub use config::{load_config, EvalConfig};
pub use error::Error;
pub use pipeline::{run_eval, Command, RunContext};
pub use report::{render_report, EvalReport, ReportFormat};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
