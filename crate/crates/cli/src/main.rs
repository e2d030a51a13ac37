//! Command-line entry points for the hand-object motion pipeline.

mod commands;
mod config;
mod data;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "worldgrip",
    about = "World-frame hand-object motion: synthetic data, diffusion prior, guided reconstruction, and evaluation",
    version
)]
struct Cli {
    /// TOML configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Compute device; only "cpu" is built in.
    #[arg(long, global = true, default_value = "cpu")]
    device: String,

    /// Step count override: optimizer steps for `train`, diffusion sampling
    /// steps for `sample`/`reconstruct`/`plan`.
    #[arg(long, global = true)]
    steps: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scripted synthetic sequences with ground truth.
    Synth {
        /// Number of sequences (scenario mix cycles pick/carry/handoff/idle).
        #[arg(long)]
        sequences: Option<usize>,
        /// Frames per sequence.
        #[arg(long)]
        length: Option<usize>,
    },
    /// Train the diffusion prior on a dataset directory.
    Train {
        /// Directory of seq_*.json + seq_*.template.json files.
        #[arg(long)]
        data: PathBuf,
        /// Resume from an existing checkpoint instead of initializing.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Draw unguided samples conditioned on a sequence's hand track.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        template: PathBuf,
        /// Number of samples (seeds seed, seed+1, ...).
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Guided reconstruction from observations (masks, joints, contacts).
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        template: PathBuf,
        /// Replace observation contacts with labels from `label-contacts`.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Label contacts for a sequence through a VLM client.
    LabelContacts {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        template: PathBuf,
        /// Client: "oracle", "replay:<dir>", or "live".
        #[arg(long, default_value = "oracle")]
        client: String,
        /// Labeling rate in frames per second.
        #[arg(long, default_value_t = 3.0)]
        rate: f64,
    },
    /// Evaluate a reconstruction against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        template: PathBuf,
        /// Interpolate predicted poses across out-of-view spans first.
        #[arg(long, default_value_t = false)]
        interpolate_out_of_view: bool,
    },
    /// Hand-guided interaction planning: coarse hands plus a contact
    /// schedule, no video input.
    Plan {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sequence providing the coarse hand trajectory.
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        template: PathBuf,
        /// Contact schedule, e.g. "right:30-90" or "left:10-40,right:35-100".
        #[arg(long)]
        schedule: String,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.device != "cpu" {
        eprintln!("error: unsupported device {:?}; this build runs on \"cpu\"", cli.device);
        std::process::exit(2);
    }
    let result: Result<()> = run(cli);
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_config = config::FileConfig::load(cli.config.as_deref())?;
    let ctx = commands::Ctx {
        config: file_config,
        seed: cli.seed,
        out: cli.out,
        steps: cli.steps,
    };
    match cli.command {
        Command::Synth { sequences, length } => commands::synth(&ctx, sequences, length),
        Command::Train { data, resume } => commands::train(&ctx, &data, resume.as_deref()),
        Command::Sample {
            checkpoint,
            sequence,
            template,
            count,
        } => commands::sample(&ctx, &checkpoint, &sequence, &template, count),
        Command::Reconstruct {
            checkpoint,
            sequence,
            template,
            labels,
        } => commands::reconstruct(&ctx, &checkpoint, &sequence, &template, labels.as_deref()),
        Command::LabelContacts {
            sequence,
            template,
            client,
            rate,
        } => commands::label_contacts(&ctx, &sequence, &template, &client, rate),
        Command::Evaluate {
            pred,
            gt,
            template,
            interpolate_out_of_view,
        } => commands::evaluate(&ctx, &pred, &gt, &template, interpolate_out_of_view),
        Command::Plan {
            checkpoint,
            sequence,
            template,
            schedule,
        } => commands::plan(&ctx, &checkpoint, &sequence, &template, &schedule),
    }
}
