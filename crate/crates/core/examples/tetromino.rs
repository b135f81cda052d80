//! Trains one circuit to turn each tetromino's coherent input into its image
//! state (photon-number probabilities shaped like the tetromino).
use cvqnn::experiments::tetromino::run_tetromino;
use cvqnn::experiments::{Experiment, ExperimentConfig, Preset, Session};

fn main() -> cvqnn::Result<()> {
    let mut cfg = ExperimentConfig::preset(Experiment::Tetromino, Preset::Desk);
    cfg.steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let r = run_tetromino(&mut Session::in_memory(cfg))?;
    for s in &r.shapes {
        println!("{}: fidelity {:.3}  box probability {:.3}  trace {:.3}", s.shape, s.fidelity, s.box_probability, s.trace);
    }
    println!("mean fidelity {:.3}, input truncation {:.3}", r.mean_fidelity, r.input_truncation_error);
    Ok(())
}
