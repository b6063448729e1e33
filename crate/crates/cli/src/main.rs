//! `ethseq`: command-line driver for every pipeline stage.

mod commands;
mod data;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ethseq", version, about = "Ethereum account transaction-sequence modeling")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run seed; every stage derives its random streams from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// TOML file layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset: tiny, desk or default.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic Ethereum-ETL export directory.
    Synthgen(SynthArgs),
    /// Parse an export directory into a corpus file.
    Ingest(IngestArgs),
    /// Build per-account transaction sequences from a corpus.
    BuildSeqs(BuildSeqsArgs),
    /// Pre-train the encoder with masked address prediction.
    Pretrain(PretrainArgs),
    /// Fine-tune encoder and classifier jointly on phishing labels.
    Finetune(FinetuneArgs),
    /// Extract account representations from a checkpoint.
    Extract(ExtractArgs),
    /// Fixed-training phishing detection on extracted representations.
    EvalPhish(EvalPhishArgs),
    /// De-anonymization retrieval over planted or labeled pairs.
    EvalDeanon(EvalDeanonArgs),
    /// Attention received by counterparties, by frequency rank.
    DiagAttention(DiagAttentionArgs),
    /// Distances on the five-node multi-hop micro-corpus.
    #[command(name = "probe-3hop")]
    Probe3hop(ProbeArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_accounts: Option<usize>,
    #[arg(long)]
    n_tx: Option<usize>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    burst_rate: Option<f64>,
    #[arg(long)]
    phisher_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Directory holding transactions.csv, labels.csv and optional
    /// kinds.csv and token_transfers.csv.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildSeqsArgs {
    /// Corpus file or the ingest output directory.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep failed transactions and repeated runs.
    #[arg(long)]
    no_dedup: bool,
    #[arg(long)]
    max_seq_len: Option<usize>,
    #[arg(long)]
    min_tx: Option<usize>,
    #[arg(long)]
    max_tx: Option<usize>,
    #[arg(long)]
    dedup_window_hours: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    mask_ratio: Option<f64>,
    /// uniform, zipfan or freq<b> (for example freq0.75).
    #[arg(long)]
    neg_strategy: Option<String>,
    /// Draw one pool per sequence instead of one per batch.
    #[arg(long)]
    no_batch_sharing: bool,
    /// Use only address and position embeddings.
    #[arg(long)]
    no_tranx_features: bool,
    /// Separate full, incoming and outgoing views.
    #[arg(long)]
    inout: bool,
    /// Fuse ERC-20 recipients into outgoing records.
    #[arg(long)]
    erc20: bool,
    /// Skip pre-training and keep the initial parameters.
    #[arg(long)]
    no_pretrain: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    /// Output directory of build-seqs.
    #[arg(long)]
    seqs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct FinetuneArgs {
    #[arg(long)]
    seqs: PathBuf,
    /// Pre-trained checkpoint; required unless --no-pretrain.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = ethseq::tasks::PHISH_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    seqs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// self (encoder output) or address (address embedding).
    #[arg(long, default_value = "self")]
    mode: String,
}

#[derive(Args, Debug)]
struct EvalPhishArgs {
    /// representations.csv or the extract output directory.
    #[arg(long)]
    reps: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Head trainings with distinct seeds.
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = ethseq::tasks::PHISH_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    head_epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalDeanonArgs {
    #[arg(long)]
    reps: PathBuf,
    /// CSV with query,target and optional cutoff_timestamp columns.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = ethseq::tasks::DEFAULT_KS)]
    ks: Vec<usize>,
}

#[derive(Args, Debug)]
struct DiagAttentionArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    seqs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Transformer layer, counted from 1.
    #[arg(long, default_value_t = 1)]
    layer: usize,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Transfers per edge of the micro-corpus.
    #[arg(long, default_value_t = 12)]
    per_edge: usize,
    #[arg(long)]
    epochs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.global.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_env("ETHSEQ_LOG")
        .init();
    match ethseq::par::with_threads(cli.global.threads, || commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
