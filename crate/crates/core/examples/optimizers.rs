//! Trains the same curve-fitting circuit with SGD, Adam and Nelder-Mead.
use cvqnn::experiments::curve::run_optimizer_comparison;
use cvqnn::experiments::{Experiment, ExperimentConfig, Preset, Session};

fn main() -> cvqnn::Result<()> {
    let mut cfg = ExperimentConfig::preset(Experiment::Optimizers, Preset::Desk);
    cfg.steps = 100;
    let report = run_optimizer_comparison(&mut Session::in_memory(cfg))?;
    println!("{}", serde_json::to_string_pretty(&report.runs).expect("serializable"));
    Ok(())
}
