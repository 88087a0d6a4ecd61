//! Command-line front end for blurforge: corpus ingestion, attack runs,
//! evaluation matrices, parameter sweeps, the camera-motion pathway,
//! interpretability maps and model training.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "blurforge", version, about = "Motion-blur adversarial examples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attack every corpus image and write adversarial images plus a report.
    Attack(AttackCmd),
    /// Success-rate matrix of adversarial sets against models.
    Eval(EvalCmd),
    /// Success rate over a grid of one attack parameter.
    Sweep(SweepCmd),
    /// Camera-motion attack with metric camera translations.
    Physical(PhysicalCmd),
    /// Interpretable perturbation maps, consistency and transferability.
    Interpret(InterpretCmd),
    /// Relative success drop after an external deblurring step.
    Resilience(ResilienceCmd),
    /// Train the built-in CNN on a corpus.
    Train(TrainCmd),
    /// Write a seeded synthetic shapes corpus.
    Generate(GenerateCmd),
}

/// Attack hyper-parameters; unset flags fall back to `--config`, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct AttackArgs {
    /// pixel | obj | bg | image | full
    #[arg(long)]
    pub variant: Option<String>,
    /// Kernel support bound.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Translation bound (fraction of the image extent).
    #[arg(long = "eps-theta")]
    pub eps_theta: Option<f64>,
    #[arg(long = "n-steps")]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long = "step-kernel")]
    pub step_kernel: Option<f64>,
    /// Translation step in pixels per iteration.
    #[arg(long = "step-theta-px")]
    pub step_theta_px: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run all iterations even after the model is fooled.
    #[arg(long = "no-early-stop")]
    pub no_early_stop: bool,
    /// zero | replicate
    #[arg(long)]
    pub padding: Option<String>,
    /// Flat `key = value` file with defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AttackCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub attack: AttackArgs,
    /// Replace the blur attack by a baseline: fgsm | mifgsm | gauss | defocus
    #[arg(long)]
    pub baseline: Option<String>,
    /// Region for blur baselines: whole | obj | bg
    #[arg(long)]
    pub region: Option<String>,
    /// L∞ budget for fgsm / mifgsm.
    #[arg(long = "eps-a")]
    pub eps_a: Option<f64>,
    /// Gaussian σ or disk diameter for blur baselines.
    #[arg(long)]
    pub size: Option<f64>,
    /// Treat skipped entries as a failure (exit 2).
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalCmd {
    /// Model checkpoints (columns).
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    /// Adversarial corpora (rows).
    #[arg(long, required = true)]
    pub adv: Vec<PathBuf>,
    /// CSV destination; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// eps | eps-theta | direction
    #[arg(long)]
    pub param: String,
    /// Comma-separated values; the parameter's standard grid when omitted.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[command(flatten)]
    pub attack: AttackArgs,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PhysicalCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub attack: AttackArgs,
    /// Object depth in meters, or a directory of `<id>.rawf` depth maps.
    #[arg(long)]
    pub depth: Option<String>,
    /// Focal lengths and principal point in pixels (default: image width/height and center).
    #[arg(long)]
    pub fx: Option<f64>,
    #[arg(long)]
    pub fy: Option<f64>,
    #[arg(long)]
    pub cx: Option<f64>,
    #[arg(long)]
    pub cy: Option<f64>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InterpretCmd {
    /// One map is optimized per model; two or more enable consistency.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    /// Clean corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Adversarial corpus with ids matching the clean corpus.
    #[arg(long)]
    pub adv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 150)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ResilienceCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub adv: PathBuf,
    /// Deblurred copies of the adversarial corpus.
    #[arg(long)]
    pub deblurred: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainCmd {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long = "test-corpus")]
    pub test_corpus: Option<PathBuf>,
    /// Checkpoint destination.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Class count (default: largest label + 1).
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateCmd {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Index of the first sample; disjoint ranges give disjoint splits.
    #[arg(long, default_value_t = 0)]
    pub offset: u64,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Attack(c) => commands::attack::run(&c),
        Command::Eval(c) => commands::eval::run(&c),
        Command::Sweep(c) => commands::sweep::run(&c),
        Command::Physical(c) => commands::physical::run(&c),
        Command::Interpret(c) => commands::interpret::run(&c),
        Command::Resilience(c) => commands::eval::run_resilience(&c),
        Command::Train(c) => commands::train::run(&c),
        Command::Generate(c) => commands::train::run_generate(&c),
    }
}
