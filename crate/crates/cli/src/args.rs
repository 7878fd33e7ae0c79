use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hearken_core::classify::Algorithm;

#[derive(Debug, Parser)]
#[command(name = "hearken", version, about = "Build, run and evaluate interview chatbots that listen actively")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find candidate intents in a corpus of free-text answers.
    Discover(DiscoverArgs),
    /// Rank the responses of one intent by how typical they are.
    Rank(RankArgs),
    /// Write a review file from ranked responses, or import a reviewed one.
    Label(LabelArgs),
    /// Train an intent or relevance classifier.
    Train(TrainArgs),
    /// Cross-validate classifiers and print a P/R/F1/Acc report.
    Crossval(CrossvalArgs),
    /// Bind trained models to an agenda topic.
    Bind(BindArgs),
    /// Run an interview in the terminal.
    Chat(ChatArgs),
    /// Serve interviews over HTTP.
    Serve(ServeArgs),
    /// Compute per-participant metrics from transcripts.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoChoice {
    Logreg,
    Svm,
    Adaboost,
    Nb,
    All,
}

impl AlgoChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            Self::Logreg => vec![Algorithm::LogisticRegression],
            Self::Svm => vec![Algorithm::LinearSvm],
            Self::Adaboost => vec![Algorithm::AdaBoost],
            Self::Nb => vec![Algorithm::NaiveBayes],
            Self::All => Algorithm::ALL.to_vec(),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be greater than 0"))
    }
}

/// A probability threshold in [0, 1].
fn unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

/// A threshold strictly inside (0, 1).
fn open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

/// The auto-label fraction, in (0, 0.5].
fn fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 0.5 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 0.5]"))
    }
}

fn intent_model(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((id, path)) if !id.trim().is_empty() && !path.trim().is_empty() => {
            Ok((id.trim().to_string(), PathBuf::from(path.trim())))
        }
        _ => Err(format!("{s:?} should look like INTENT=MODEL_FILE")),
    }
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Answers, one per line; lines of the form `id<TAB>text` keep their ids.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory for topics.json, encoder.json and intents.tsv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of LDA topics.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..=500))]
    pub k: u64,
    /// Document-topic prior (default 50/k).
    #[arg(long, value_parser = positive)]
    pub alpha: Option<f64>,
    /// Topic-word prior.
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub beta: f64,
    /// Gibbs sweeps.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    pub iters: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dimension of the sentence encoder fit on the corpus.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(16..=1_048_576))]
    pub dim: u64,
    /// Intents covering less than this share of documents are left out of intents.tsv.
    #[arg(long, default_value_t = 0.10, value_parser = unit)]
    pub min_coverage: f64,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// topics.json written by `discover`.
    #[arg(long)]
    pub topics: PathBuf,
    /// encoder.json written by `discover`.
    #[arg(long)]
    pub encoder: PathBuf,
    /// Intent id such as `c1`.
    #[arg(long)]
    pub intent: String,
    /// A response joins the cluster when its weight on the intent exceeds this.
    #[arg(long, default_value_t = 0.25, value_parser = open_unit)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// ranked.tsv written by `rank`.
    #[arg(long, conflicts_with = "import", required_unless_present = "import")]
    pub ranked: Option<PathBuf>,
    /// Share of the ranked list labeled positive from the top, and negative from the bottom.
    #[arg(long, default_value_t = 0.2, value_parser = fraction)]
    pub fraction: f64,
    /// Agenda topic the answers belong to.
    #[arg(long, required_unless_present = "import")]
    pub topic: Option<String>,
    #[arg(long, required_unless_present = "import")]
    pub intent: Option<String>,
    /// Also list the unlabeled middle of the ranking, marked `drop`, for reviewers to promote.
    #[arg(long)]
    pub include_middle: bool,
    /// A reviewed file to turn into a training dataset.
    #[arg(long)]
    pub import: Option<PathBuf>,
    /// The file as exported, used to spot human edits (default: IMPORT.orig when present).
    #[arg(long, requires = "import")]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset written by `label --import`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub encoder: PathBuf,
    /// Train an intent model from this intent's rows.
    #[arg(long, conflicts_with = "relevance", required_unless_present = "relevance")]
    pub intent: Option<String>,
    /// Train the relevance model of this topic instead.
    #[arg(long, value_name = "TOPIC")]
    pub relevance: Option<String>,
    /// Extra off-topic answers (one per line) used as relevance negatives.
    #[arg(long, requires = "relevance")]
    pub negatives: Option<PathBuf>,
    /// `all` cross-validates every algorithm and keeps the best.
    #[arg(long, value_enum, default_value_t = AlgoChoice::Logreg)]
    pub algo: AlgoChoice,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..=100))]
    pub folds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long, required_unless_present = "synthetic", requires = "encoder")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long, requires = "dataset", required_unless_present_any = ["relevance", "synthetic"])]
    pub intent: Option<String>,
    #[arg(long, value_name = "TOPIC", requires = "dataset", conflicts_with = "intent")]
    pub relevance: Option<String>,
    /// Use the built-in separable dataset (1000 rows, 8 dimensions).
    #[arg(long, conflicts_with = "dataset")]
    pub synthetic: bool,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..=100))]
    pub folds: u64,
    #[arg(long, value_enum, default_value_t = AlgoChoice::All)]
    pub algo: AlgoChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BindArgs {
    #[arg(long)]
    pub agenda: PathBuf,
    #[arg(long)]
    pub topic: String,
    /// Bundle id (default: the topic id).
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub encoder: PathBuf,
    /// Relevance model of the topic.
    #[arg(long)]
    pub relevance: PathBuf,
    /// Intent model, as INTENT=FILE; repeat per intent.
    #[arg(long = "intent-model", value_parser = intent_model)]
    pub intents: Vec<(String, PathBuf)>,
    /// TOML file of `[[templates]]` entries (intent, technique, texts) added to the topic.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, value_parser = unit)]
    pub threshold1: Option<f64>,
    #[arg(long, value_parser = unit)]
    pub threshold2: Option<f64>,
    /// Receives bundle.toml, the models, and agenda.toml with the topic bound.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long)]
    pub agenda: Vec<PathBuf>,
    /// bundle.toml written by `bind`; repeat for several.
    #[arg(long)]
    pub bundle: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long)]
    pub agenda: PathBuf,
    #[arg(long)]
    pub bundle: Vec<PathBuf>,
    /// Session id; a fresh random id by default.
    #[arg(long)]
    pub session_id: Option<String>,
    /// Session seed (default: derived from the agenda seed and session id, as the server does).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use a fixed clock: the first timestamp, in milliseconds.
    #[arg(long, requires = "clock_step")]
    pub clock_start: Option<u64>,
    /// Milliseconds added per message under the fixed clock.
    #[arg(long, requires = "clock_start")]
    pub clock_step: Option<u64>,
    /// Write the session log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write the final transcript JSON here.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub engines: EngineArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "hearken-data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Transcript JSON files, or directories of them.
    #[arg(long, required = true)]
    pub transcripts: Vec<PathBuf>,
    /// Coding sheet: session, response_index, relevance, clarity, specificity.
    #[arg(long)]
    pub coding: Option<PathBuf>,
    /// Reference corpus for informativeness, plain text.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
