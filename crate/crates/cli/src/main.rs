use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use convqual::classify::{load_annotations, train_dimension_model, ClassifierSpec, Dimension};
use convqual::corpus::{load_dataset, ParseOptions, TurnScope};
use convqual::error::Error;
use convqual::pipeline::{run_eval, Command, RunContext};
use convqual::report::{render_report, EvalReport, ReportFormat};
use convqual::{load_config, EvalConfig};

#[derive(Parser)]
#[command(
    name = "convqual",
    version,
    about = "Diversity and realism metrics for synthetic conversational-recommender datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Entropy of session labels per dimension, and the weighted score per version.
    Diversity(Common),
    /// Rater batches and realism scores.
    #[command(subcommand)]
    Realism(RealismCmd),
    /// Diversity plus discriminator inference for every configured version.
    Report(WithRating),
    /// Trains a naive-Bayes classifier for one dimension from annotated sessions.
    TrainDimension(TrainDimension),
}

#[derive(Subcommand)]
enum RealismCmd {
    /// Draws a blinded, shuffled batch for human raters.
    Sample(Common),
    /// Scores a batch from the raters' judgments.
    Score(WithRating),
    /// Trains the discriminator on the raters' judgments.
    Train(WithRating),
    /// Predicts human-generated conversations with a trained discriminator.
    Infer(Infer),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Machine,
}

#[derive(Args)]
struct Common {
    /// Evaluation configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for every file the command writes.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Skip malformed dataset lines instead of failing.
    #[arg(long)]
    skip_invalid: bool,
    /// Overrides realism.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WithRating {
    #[command(flatten)]
    common: Common,
    /// Exported batch directory. Overrides realism.batch.
    #[arg(long)]
    batch: Option<PathBuf>,
    /// Rater labels CSV. Overrides realism.labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Trained discriminator. Overrides realism.discriminator.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct Infer {
    #[command(flatten)]
    rating: WithRating,
    /// Datasets to score. Defaults to every configured version.
    datasets: Vec<PathBuf>,
}

#[derive(Args)]
struct TrainDimension {
    #[arg(long)]
    name: String,
    /// Comma-separated class labels, in order.
    #[arg(long, value_delimiter = ',', required = true)]
    vocabulary: Vec<String>,
    #[arg(long, value_enum)]
    scope: Option<Scope>,
    /// Conversations to train on.
    #[arg(long)]
    dataset: PathBuf,
    /// `conversation_id,label` CSV.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value_t = convqual::classify::DEFAULT_SMOOTHING)]
    smoothing: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    skip_invalid: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    UserOnly,
    SystemOnly,
    All,
}

impl From<Scope> for TurnScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::UserOnly => TurnScope::UserOnly,
            Scope::SystemOnly => TurnScope::SystemOnly,
            Scope::All => TurnScope::All,
        }
    }
}

fn load(common: &Common) -> Result<EvalConfig, Error> {
    let config = load_config(&common.config)?;
    Ok(match common.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    })
}

fn context(common: &Common) -> RunContext {
    RunContext {
        out_dir: common.out.clone(),
        skip_invalid: common.skip_invalid,
        ..RunContext::default()
    }
}

fn rating_context(r: &WithRating) -> RunContext {
    RunContext {
        batch_dir: r.batch.clone(),
        labels: r.labels.clone(),
        discriminator: r.model.clone(),
        ..context(&r.common)
    }
}

fn emit(report: &EvalReport, out: &Path, format: Format) -> Result<(), Error> {
    let (format, name) = match format {
        Format::Md => (ReportFormat::Markdown, "report.md"),
        Format::Machine => (ReportFormat::Machine, "report.json"),
    };
    let text = render_report(report, format);
    let path = out.join(name);
    std::fs::write(&path, &text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    print!("{text}");
    Ok(())
}

fn evaluate(common: &Common, command: Command, ctx: RunContext) -> Result<(), Error> {
    let config = load(common)?;
    let report = run_eval(&config, command, &ctx)?;
    emit(&report, &common.out, common.format)
}

fn train_dimension(t: &TrainDimension) -> Result<(), Error> {
    let file_name = format!(
        "{}.nb.json",
        t.name.to_lowercase().replace(char::is_whitespace, "_")
    );
    let dimension = Dimension::new(
        t.name.clone(),
        t.vocabulary.iter().map(|l| l.trim().to_string()).collect(),
        ClassifierSpec::NaiveBayes(PathBuf::from(&file_name)),
        t.scope.map(TurnScope::from),
    )?;
    let parsed = load_dataset(
        &t.dataset,
        ParseOptions {
            skip_invalid: t.skip_invalid,
        },
    )?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let annotations = load_annotations(&t.annotations)?;
    let model = train_dimension_model(&parsed.dataset, &dimension, &annotations, t.smoothing)?;
    std::fs::create_dir_all(&t.out).map_err(|source| Error::Io {
        path: t.out.display().to_string(),
        source,
    })?;
    let path = t.out.join(file_name);
    model.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Cmd::Diversity(c) => evaluate(&c, Command::Diversity, context(&c)),
        Cmd::Report(r) => evaluate(&r.common, Command::Full, rating_context(&r)),
        Cmd::Realism(RealismCmd::Sample(c)) => evaluate(&c, Command::RealismSample, context(&c)),
        Cmd::Realism(RealismCmd::Score(r)) => {
            evaluate(&r.common, Command::RealismScore, rating_context(&r))
        }
        Cmd::Realism(RealismCmd::Train(r)) => {
            evaluate(&r.common, Command::RealismTrain, rating_context(&r))
        }
        Cmd::Realism(RealismCmd::Infer(i)) => {
            let ctx = RunContext {
                datasets: i.datasets.clone(),
                ..rating_context(&i.rating)
            };
            evaluate(&i.rating.common, Command::RealismInfer, ctx)
        }
        Cmd::TrainDimension(t) => train_dimension(&t),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.report();
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "error": report }))
                    .expect("error report serializes")
            );
            ExitCode::from(report.exit_code as u8)
        }
    }
}
