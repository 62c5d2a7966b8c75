use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sonarshape_cli::pipeline::{self, Stage};
use sonarshape_cli::{CliResult, Context, PipelineConfig};

/// Shape recovery from multi-frequency acoustic far fields.
#[derive(Parser)]
#[command(name = "sonarshape", version)]
struct Args {
    /// TOML pipeline configuration (built-in defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; every stage seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root (must exist).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Print training progress every n epochs (0 is silent).
    #[arg(long, global = true, default_value_t = 10)]
    progress: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random star-shaped objects and the split.
    Gen,
    /// Simulate far fields of every generated shape.
    Simulate,
    /// Train one network stage.
    Train {
        #[arg(value_enum)]
        stage: Stage,
    },
    /// Score all stages on the test split.
    Eval,
    /// Retrain the inverse network on fewer frequency blocks.
    AblateFreq,
    /// Retrain on a reduced angular window.
    Halfplane,
    /// Disk series tables and oracle agreement.
    Mie,
    /// Recover a shape from a far-field CSV.
    Invert {
        farfield: PathBuf,
        /// Draw the latent code with this seed instead of using the mean.
        #[arg(long)]
        sample: Option<u64>,
    },
}

fn run(args: Args) -> CliResult<()> {
    let cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    }
    .with_overrides(args.seed, args.out);
    cfg.validate()?;
    let mut ctx = Context::new(cfg, args.jobs.max(1));
    ctx.progress_every = args.progress;
    match args.command {
        Command::Gen => pipeline::cmd_gen(&ctx),
        Command::Simulate => pipeline::cmd_simulate(&ctx),
        Command::Train { stage } => pipeline::cmd_train(&ctx, stage),
        Command::Eval => pipeline::cmd_eval(&ctx).map(drop),
        Command::AblateFreq => pipeline::cmd_ablate_frequencies(&ctx).map(drop),
        Command::Halfplane => pipeline::cmd_halfplane(&ctx).map(drop),
        Command::Mie => pipeline::cmd_mie(&ctx),
        Command::Invert { farfield, sample } => pipeline::cmd_invert(&ctx, &farfield, sample),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
