//! entrosim: synthesize corpora, extract entropy graphs, train the Siamese
//! classifier, and evaluate checkpoints.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "entrosim",
    version,
    about = "Entropy-graph extraction and Siamese ransomware-family classification pipeline"
)]
pub struct Cli {
    /// Master seed; all randomness in a run derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = all cores). Results never depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus of binaries.
    Synth(SynthArgs),
    /// Extract .egr entropy graphs and a manifest from a labeled corpus.
    Extract(ExtractArgs),
    /// Train a checkpoint from a manifest (internally split train/validation).
    Train(TrainArgs),
    /// Classify a binary file or every sample in a manifest.
    Classify(ClassifyArgs),
    /// Evaluate a checkpoint on a manifest: report.json, cm.csv, embeddings.csv.
    Evaluate(EvaluateArgs),
    /// Bootstrap repetitions and optional training-ratio sweep.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusPreset {
    /// 8 majority families x 40 samples plus minorities of 6/9/18.
    PaperShape,
    /// 4 small families for smoke tests.
    Mini,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelPreset {
    /// 64x64 graphs, three thin blocks, 128/64 dense units.
    Desk,
    /// 224x224 graphs, five VGG-16-shaped blocks, 1024/512 dense units.
    Paper,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FillArg {
    Resample,
    Pad,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Corpus preset.
    #[arg(long, value_enum, default_value_t = CorpusPreset::PaperShape)]
    pub preset: CorpusPreset,
    /// Output directory for <family>/<id>.bin files and labels.csv.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Corpus root directory.
    pub root: PathBuf,
    /// Labels CSV (relative_path,family).
    #[arg(long)]
    pub labels: PathBuf,
    /// Segment length in bytes [default: 200].
    #[arg(long)]
    pub segment_len: Option<usize>,
    /// Graph size as HxW, e.g. 64x64 [default: 224x224].
    #[arg(long)]
    pub graph: Option<String>,
    /// Stream-to-matrix fill policy [default: resample].
    #[arg(long, value_enum)]
    pub fill: Option<FillArg>,
    /// Output directory for .egr files and manifest.jsonl.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Args, Clone)]
pub struct TrainFlags {
    /// key=value config file; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training epochs [default: 50].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Pair batch size, even [default: 24].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 1e-4].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Center-loss weight alpha [default: 0.3].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Center update rate gamma in (0,1] [default: 0.5].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Train fraction of the split [default: 0.8].
    #[arg(long)]
    pub split: Option<f64>,
    /// Augment classes below this count [default: 20].
    #[arg(long)]
    pub augment_threshold: Option<usize>,
    /// Augmentation target count; 0 = median class count [default: 0].
    #[arg(long)]
    pub augment_target: Option<usize>,
    /// Encoder preset [default: desk].
    #[arg(long, value_enum, default_value_t = ModelPreset::Desk)]
    pub preset: ModelPreset,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Manifest of extracted graphs.
    pub manifest: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Output directory: model.ntc, loss_history.csv, test_manifest.jsonl.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Trained .ntc checkpoint.
    pub checkpoint: PathBuf,
    /// A binary file, or a .jsonl manifest to classify every sample.
    pub input: PathBuf,
    /// Write JSONL here instead of stdout.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Trained .ntc checkpoint.
    pub checkpoint: PathBuf,
    /// Manifest of samples to evaluate.
    pub manifest: PathBuf,
    /// Output directory: report.json, cm.csv, embeddings.csv.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// Manifest of extracted graphs.
    pub manifest: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Bootstrap repetitions [default: 30].
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    /// Optional ratio sweep start:end:step, e.g. 0.1:0.9:0.1.
    #[arg(long)]
    pub ratios: Option<String>,
    /// Output directory: summary.json, rep_NNN/report.json, ratio_sweep.csv.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

/// Usage errors exit 2 (like clap's own), runtime errors exit 1.
pub enum CliError {
    Usage(String),
    Runtime(entrosim::Error),
}

impl From<entrosim::Error> for CliError {
    fn from(e: entrosim::Error) -> Self {
        // Configuration problems are usage errors: the invocation, not the
        // run, is at fault.
        match e {
            entrosim::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("ENTROSIM_LOG", "error"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
        {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Synth(args) => commands::synth(&cli, args),
        Command::Extract(args) => commands::extract(&cli, args),
        Command::Train(args) => commands::train(&cli, args),
        Command::Classify(args) => commands::classify(&cli, args),
        Command::Evaluate(args) => commands::evaluate(&cli, args),
        Command::Experiment(args) => commands::experiment(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
