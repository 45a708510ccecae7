//! `ctcsk`: pipelines for online recognition over gloss-probability
//! streams. Subcommands compose the library into three flows: build a
//! dictionary from alignments, train and probe the toy classifier, and run
//! the sliding-window online decoder with evaluation.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "ctcsk",
    version,
    about = "Online gloss-stream recognition toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Emit machine-readable JSON on stdout instead of human tables.
    #[arg(long, global = true)]
    json: bool,

    /// Zero all wall-time fields so outputs are byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,

    /// Worker threads for per-video parallelism. Falls back to the
    /// CTCSK_THREADS environment variable, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every random choice the invoked pipeline makes.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Log verbosity on stderr: quiet, info, or debug.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic probability-stream corpus with ground truth.
    Simulate(SimulateArgs),
    /// Segment a corpus into pseudo-GT sign spans.
    Align(AlignArgs),
    /// Build the full augmented sign dictionary.
    BuildDict(BuildDictArgs),
    /// Train the toy window classifier on synthetic features.
    TrainToy(TrainToyArgs),
    /// Run the sliding-window online decoder over a corpus.
    DecodeOnline(DecodeOnlineArgs),
    /// Decode whole streams offline with prefix beam search.
    DecodeOffline(DecodeOfflineArgs),
    /// Score hypotheses against a reference manifest.
    Eval(EvalArgs),
    /// Measure per-window processing latency on a synthetic stream.
    BenchLatency(BenchArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Vocabulary size, excluding the blank class.
    #[arg(long, default_value_t = 5)]
    vocab: usize,
    /// Signs per video: a count like `5` or an inclusive range like `5-10`.
    #[arg(long, default_value = "5")]
    signs: String,
    #[arg(long, default_value_t = 10)]
    videos: usize,
    /// Confusion level in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 8)]
    dur_min: usize,
    #[arg(long, default_value_t = 24)]
    dur_max: usize,
    #[arg(long, default_value_t = 2)]
    gap_min: usize,
    #[arg(long, default_value_t = 8)]
    gap_max: usize,
    /// Boundary frames that mix adjacent classes.
    #[arg(long, default_value_t = 0)]
    blur: usize,
    #[arg(long, default_value_t = 20.0)]
    frame_ms: f64,
    /// Output directory for .prb files, vocab.json, and manifest.json.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SegmentorArg {
    Ctc,
    Equal,
}

#[derive(Args, Debug)]
struct AlignArgs {
    /// Corpus directory produced by `simulate`.
    #[arg(long = "in")]
    input: std::path::PathBuf,
    #[arg(long, value_enum, default_value_t = SegmentorArg::Ctc)]
    segmentor: SegmentorArg,
    /// Output JSONL file; defaults to `<in>/alignment.jsonl`.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AugmentArg {
    Center,
    Iou,
    None,
}

#[derive(Args, Debug)]
struct BuildDictArgs {
    #[arg(long = "in")]
    input: std::path::PathBuf,
    #[arg(long, value_enum, default_value_t = SegmentorArg::Ctc)]
    segmentor: SegmentorArg,
    /// Augmentation window size in frames.
    #[arg(long, default_value_t = 16)]
    window: usize,
    #[arg(long, value_enum, default_value_t = AugmentArg::Center)]
    augment: AugmentArg,
    /// IoU threshold for `--augment iou`.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Percentage of blank regions harvested as background instances.
    #[arg(long, default_value_t = 100.0)]
    bg_percent: f64,
    /// Output JSONL file; defaults to `<in>/dict.jsonl`.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplingArg {
    Gloss,
    Instance,
}

#[derive(Args, Debug)]
struct TrainToyArgs {
    #[arg(long, default_value_t = 5)]
    glosses: usize,
    /// Glosses per mini-batch.
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Instances per gloss.
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    /// Disable the saliency loss terms.
    #[arg(long)]
    no_saliency: bool,
    #[arg(long, value_enum, default_value_t = SamplingArg::Gloss)]
    sampling: SamplingArg,
    #[arg(long, default_value_t = 0.0)]
    label_smoothing: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScorerArg {
    Geomean,
    ArgmaxCenter,
}

#[derive(Args, Debug)]
struct DecodeOnlineArgs {
    /// Corpus directory; mutually exclusive with --prb and --stdin.
    #[arg(long = "in")]
    input: Option<std::path::PathBuf>,
    /// Single PRB1 stream to decode.
    #[arg(long, conflicts_with = "input")]
    prb: Option<std::path::PathBuf>,
    /// Read one PRB1 stream from standard input.
    #[arg(long, conflicts_with_all = ["input", "prb"])]
    stdin: bool,
    #[arg(long, default_value_t = 16)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Voting bag size (odd).
    #[arg(long, default_value_t = 7)]
    bag: usize,
    #[arg(long, default_value_t = 20.0)]
    frame_ms: f64,
    #[arg(long, value_enum, default_value_t = ScorerArg::Geomean)]
    scorer: ScorerArg,
    /// Use the chained-CTC streaming baseline instead of the window
    /// classifier path.
    #[arg(long)]
    baseline_ctc: bool,
    /// Beam width for the baseline decoder.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Run the baseline through the voting post-processor as well.
    #[arg(long)]
    post: bool,
    /// Output directory for events and hyp.json; defaults to the corpus
    /// directory.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeOfflineArgs {
    #[arg(long = "in")]
    input: std::path::PathBuf,
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Output file; defaults to `<in>/hyp_offline.json`.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Reference manifest.json.
    #[arg(long = "ref")]
    reference: std::path::PathBuf,
    /// Hypotheses file produced by a decode subcommand.
    #[arg(long)]
    hyp: std::path::PathBuf,
    /// Directory with per-video events files, for the latency report.
    #[arg(long)]
    events: Option<std::path::PathBuf>,
    /// Window size used when decoding, for the latency report.
    #[arg(long, default_value_t = 16)]
    window: usize,
    #[arg(long, default_value_t = 20.0)]
    frame_ms: f64,
    /// Also write the per-video table as CSV.
    #[arg(long)]
    csv: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 2000)]
    frames: usize,
    #[arg(long, default_value_t = 5)]
    vocab: usize,
    #[arg(long, default_value_t = 16)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 7)]
    bag: usize,
    #[arg(long, default_value_t = 20.0)]
    frame_ms: f64,
    #[arg(long, value_enum, default_value_t = ScorerArg::Geomean)]
    scorer: ScorerArg,
    /// Decoding passes over the stream.
    #[arg(long, default_value_t = 3)]
    iters: usize,
}

/// Failures split by exit code: usage errors exit 1, data errors exit 2.
enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Data(err)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = resolve_threads(cli.threads) {
        // A second pool build in one process is fine to ignore.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let ctx = commands::Ctx {
        json: cli.json,
        no_timing: cli.no_timing,
        seed: cli.seed,
        verbose: cli.log_level != "quiet",
    };

    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(&ctx, &args),
        Command::Align(args) => commands::align::run(&ctx, &args),
        Command::BuildDict(args) => commands::build_dict::run(&ctx, &args),
        Command::TrainToy(args) => commands::train_toy::run(&ctx, &args),
        Command::DecodeOnline(args) => commands::decode::run_online(&ctx, &args),
        Command::DecodeOffline(args) => commands::decode::run_offline(&ctx, &args),
        Command::Eval(args) => commands::eval::run(&ctx, &args),
        Command::BenchLatency(args) => commands::bench::run(&ctx, &args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("CTCSK_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}
