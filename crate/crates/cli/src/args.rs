use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctcx::trainer::{Decoder, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "ctcx", version, about = "CTC speech recognizers with cross-alphabet transfer")]
pub struct Cli {
    /// Print machine-readable JSON instead of the human summary.
    #[arg(long, global = true)]
    pub json: bool,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize transcripts and drop unusable rows, or generate a synthetic corpus.
    Prepare(PrepareArgs),
    /// Compute MFCC caches for every manifest row.
    Features(FeaturesArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Copy recurrent layers from a checkpoint into a model for another alphabet.
    Transfer(TransferArgs),
    /// Report mean cost and LER of a checkpoint on a manifest.
    Evaluate(EvaluateArgs),
    /// Transcribe one WAV file.
    Decode(DecodeArgs),
    /// Run the LSTM/BiLSTM × random/transfer experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Input manifest (JSON Lines).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub manifest: Option<PathBuf>,
    /// Built-in alphabet name (`ru`, `kk`) or alphabet file.
    #[arg(long)]
    pub alphabet: String,
    /// Output manifest path.
    #[arg(long)]
    pub out: PathBuf,
    /// Generate this many synthetic utterances instead of reading a manifest.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Seed for synthetic transcripts and noise.
    #[arg(long, default_value_t = 0)]
    pub synthetic_seed: u64,
    /// JSON file with synthetic generator settings.
    #[arg(long)]
    pub synthetic_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// JSON feature configuration; defaults to 25 ms / 10 ms, 26 mels, 13 MFCC.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Arch {
    Lstm,
    Bilstm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Random,
    Transfer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    Greedy,
    Beam,
}

#[derive(Debug, Args)]
pub struct DecoderArgs {
    #[arg(long, value_enum, default_value = "greedy")]
    pub decoder: DecoderKind,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub beam_width: u64,
}

impl DecoderArgs {
    pub fn decoder(&self) -> Decoder {
        match self.decoder {
            DecoderKind::Greedy => Decoder::Greedy,
            DecoderKind::Beam => Decoder::Beam {
                width: self.beam_width as usize,
            },
        }
    }
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected 3 fractions, got {}", p.len()))
}

/// Optimizer and architecture flags. Unset flags take the reference defaults.
#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dropout_keep: Option<f64>,
    /// Train, validation and test fractions, e.g. `0.8,0.1,0.1`.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    #[arg(long, conflicts_with = "strict_paper")]
    pub grad_clip_norm: Option<f64>,
    /// Disable gradient clipping.
    #[arg(long)]
    pub strict_paper: bool,
    /// Reuse the same dropout masks every epoch.
    #[arg(long)]
    pub fixed_dropout_seed: bool,
    /// Decoder for per-epoch LER.
    #[arg(long, value_enum, default_value = "greedy")]
    pub eval_decoder: DecoderKind,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub eval_beam_width: u64,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
}

impl TrainFlags {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            momentum: self.momentum.unwrap_or(d.momentum),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            dropout_keep: self.dropout_keep.unwrap_or(d.dropout_keep),
            split: self.split.unwrap_or(d.split),
            grad_clip_norm: if self.strict_paper {
                None
            } else {
                self.grad_clip_norm.or(d.grad_clip_norm)
            },
            seed,
            eval_decoder: match self.eval_decoder {
                DecoderKind::Greedy => Decoder::Greedy,
                DecoderKind::Beam => Decoder::Beam {
                    width: self.eval_beam_width as usize,
                },
            },
            fixed_dropout_seed: self.fixed_dropout_seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature cache directory; defaults to `features/` next to the manifest.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub alphabet: String,
    #[arg(long, value_enum, default_value = "lstm")]
    pub arch: Arch,
    #[arg(long, value_enum, default_value = "random")]
    pub init: Init,
    #[arg(long)]
    pub source_checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `metrics.csv`, `model.ckpt` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Source checkpoint.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target_alphabet: String,
    /// Output checkpoint; the report is written next to it as `<out>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the reinitialized output head.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Required target hidden size (defaults to the source's).
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Required target layer count (defaults to the source's).
    #[arg(long)]
    pub layers: Option<usize>,
    /// Required target architecture (defaults to the source's).
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    /// JSON feature configuration used when the model was trained.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub alphabet: String,
    /// Source checkpoint; repeat to give both an LSTM and a BiLSTM source.
    #[arg(long)]
    pub source_checkpoint: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for per-scenario metrics and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}
