use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scanlift::exposure::{EqualizeMode, DEFAULT_EXPOSURE_THRESHOLD};
use scanlift::nn::Arch;
use scanlift::synth::PhantomKind;

#[derive(Debug, Parser)]
#[command(name = "scanlift", version, about = "Grayscale radiograph quality assessment and enhancement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the exposure of PGM images.
    Assess(AssessArgs),
    /// Equalize an image if it is under- or over-exposed.
    Equalize(EqualizeArgs),
    /// Run the full correction pipeline with one enhancement method.
    Enhance(EnhanceArgs),
    /// Train an SRCNN or VDSR model on degraded/original pairs.
    Train(TrainArgs),
    /// Degrade, restore and score a corpus with several methods.
    Bench(BenchArgs),
    /// Write synthetic phantoms.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Um,
    Clahe,
    Bicubic,
    Srcnn,
    Vdsr,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Um, Method::Clahe, Method::Bicubic, Method::Srcnn, Method::Vdsr];

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Um => "UM",
            Method::Clahe => "CLAHE",
            Method::Bicubic => "Bicubic",
            Method::Srcnn => "SRCNN",
            Method::Vdsr => "VDSR",
        }
    }

    pub fn arch(self) -> Option<Arch> {
        match self {
            Method::Srcnn => Some(Arch::Srcnn),
            Method::Vdsr => Some(Arch::Vdsr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Srcnn,
    Vdsr,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Srcnn => Arch::Srcnn,
            ArchArg::Vdsr => Arch::Vdsr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum ModeArg {
    #[default]
    Histeq,
    Minmax,
}

impl From<ModeArg> for EqualizeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Histeq => EqualizeMode::HistEq,
            ModeArg::Minmax => EqualizeMode::MinMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ellipses,
    Bars,
    Gradient,
    Mixed,
}

impl From<KindArg> for PhantomKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ellipses => PhantomKind::Ellipses,
            KindArg::Bars => PhantomKind::Bars,
            KindArg::Gradient => PhantomKind::Gradient,
            KindArg::Mixed => PhantomKind::Mixed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExposureArgs {
    /// Fraction of pixels on one side of mid-gray that marks an exposure fault.
    #[arg(long, default_value_t = DEFAULT_EXPOSURE_THRESHOLD)]
    pub threshold: f64,
    /// Equalization used on faulty images.
    #[arg(long, value_enum, default_value_t = ModeArg::Histeq)]
    pub mode: ModeArg,
    /// Equalize even when the exposure is normal.
    #[arg(long)]
    pub force_equalize: bool,
}

/// Parameters of the enhancement methods; each method reads only its own.
#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// CLAHE window side (odd).
    #[arg(long, default_value_t = 15)]
    pub window: usize,
    /// CLAHE clip limit in counts per bin [default: 1% of the window area].
    #[arg(long)]
    pub clip_limit: Option<u64>,
    /// CLAHE clipping passes.
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    /// Unsharp-mask blur sigma.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Unsharp-mask gain.
    #[arg(long, default_value_t = 1.0)]
    pub amount: f64,
    /// Model weight file; may be given once per architecture.
    #[arg(long)]
    pub weights: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Directory of PGM images.
    #[arg(long, conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    /// Use N generated phantoms instead of a directory.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// First phantom seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EXPOSURE_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EqualizeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub exposure: ExposureArgs,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    /// Upscaling factor [default: 2 for bicubic, 1 for the networks].
    #[arg(long)]
    pub factor: Option<usize>,
    /// Ground truth to score the output against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Write an input | output comparison image here.
    #[arg(long, value_name = "PATH")]
    pub side_by_side: Option<PathBuf>,
    /// Write the score row here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    #[command(flatten)]
    pub exposure: ExposureArgs,
    #[command(flatten)]
    pub params: MethodArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    /// Where to write the trained weights.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Degradation factor used to build training pairs.
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Optimizer steps per epoch.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Base learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Element-wise gradient clip; 0 disables clipping.
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Seed for initialization and patch sampling [default: the corpus seed].
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// Continue from these weights instead of a random initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    /// Comma-separated methods [default: all methods with weights available].
    #[arg(long = "method", value_enum, value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    #[command(flatten)]
    pub params: MethodArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of phantoms.
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Kind of the first phantom; later ones cycle through the others.
    #[arg(long, value_enum, default_value_t = KindArg::Ellipses)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 3.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub exposure_bias: f64,
    /// Primitives per phantom.
    #[arg(long, default_value_t = 5)]
    pub primitives: usize,
}
