use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cvqnn::experiments::{self, checkpoint_load, Experiment, ExperimentConfig, Preset, Session};

#[derive(Parser)]
#[command(name = "cvqnn", about = "Continuous-variable quantum neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed, overriding the preset and config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Scale::Desk)]
    preset: Scale,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a noisy curve with a one-mode network.
    Curvefit,
    /// Curve fit under per-layer photon loss.
    LossSweep,
    /// SGD, Adam and Nelder-Mead on the curve task.
    Optimizers,
    /// No penalty, L1, L2 and trace penalty on the curve task.
    Penalties,
    /// Hybrid fraud classifier.
    Fraud,
    /// Tetromino image generation.
    Tetromino,
    /// Fock-state autoencoder.
    Autoencoder,
    /// Euler decomposition and mesh compilation demo.
    Decompose,
    /// Continue from a checkpoint (default `<out>/checkpoint.json`).
    Resume { checkpoint: Option<PathBuf> },
}

fn run(cli: Cli) -> cvqnn::Result<serde_json::Value> {
    let experiment = match cli.command {
        Command::Curvefit => Experiment::Curvefit,
        Command::LossSweep => Experiment::LossSweep,
        Command::Optimizers => Experiment::Optimizers,
        Command::Penalties => Experiment::Penalties,
        Command::Fraud => Experiment::Fraud,
        Command::Tetromino => Experiment::Tetromino,
        Command::Autoencoder => Experiment::Autoencoder,
        Command::Decompose => Experiment::Decompose,
        Command::Resume { checkpoint } => {
            let path = checkpoint
                .or_else(|| cli.out.as_ref().map(|o| o.join(experiments::checkpoint::CHECKPOINT_FILE)))
                .ok_or_else(|| cvqnn::Error::Config("resume needs a checkpoint path or --out".into()))?;
            let mut ck = checkpoint_load(&path)?;
            if let Some(o) = cli.out {
                ck.config.out = o;
            }
            eprintln!("resuming {} from {}", ck.config.experiment.name(), path.display());
            return experiments::run(&mut Session::from_checkpoint(ck));
        }
    };
    let preset = match cli.preset {
        Scale::Desk => Preset::Desk,
        Scale::Paper => Preset::Paper,
    };
    let mut cfg = ExperimentConfig::preset(experiment, preset);
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    experiments::run(&mut Session::new(cfg))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
