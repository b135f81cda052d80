//! Experiment runners, datasets, configuration, checkpoints and plot data.

pub mod autoencoder;
pub mod checkpoint;
pub mod config;
pub mod curve;
pub mod data;
pub mod decompose;
pub mod fraud;
pub mod plotdata;
pub mod tetromino;

use serde_json::Value;

pub use checkpoint::{checkpoint_load, checkpoint_save, Checkpoint, Session};
pub use config::{Experiment, ExperimentConfig, Preset};

use crate::error::Result;

/// Runs the configured experiment and returns its summary as JSON.
pub fn run(session: &mut Session) -> Result<Value> {
    session.config.validate()?;
    if session.persist {
        std::fs::create_dir_all(session.out())?;
        std::fs::write(session.out().join("config.txt"), session.config.to_text())?;
    }
    Ok(match session.config.experiment {
        Experiment::Curvefit => serde_json::to_value(curve::run_curvefit(session)?)?,
        Experiment::LossSweep => serde_json::to_value(curve::run_loss_sweep(session)?)?,
        Experiment::Optimizers => serde_json::to_value(curve::run_optimizer_comparison(session)?)?,
        Experiment::Penalties => serde_json::to_value(curve::run_penalty_comparison(session)?)?,
        Experiment::Fraud => serde_json::to_value(fraud::run_fraud(session)?)?,
        Experiment::Tetromino => serde_json::to_value(tetromino::run_tetromino(session)?)?,
        Experiment::Autoencoder => serde_json::to_value(autoencoder::run_autoencoder(session)?)?,
        Experiment::Decompose => serde_json::to_value(decompose::run_decompose(session)?)?,
    })
}
