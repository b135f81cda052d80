//! Hybrid classical-quantum fraud classifier on the synthetic transaction set.
//! Point `data` at a real CSV with columns V1..V28, Amount, Class to use it.
use cvqnn::experiments::fraud::run_fraud;
use cvqnn::experiments::{Experiment, ExperimentConfig, Preset, Session};

fn main() -> cvqnn::Result<()> {
    let mut cfg = ExperimentConfig::preset(Experiment::Fraud, Preset::Desk);
    cfg.steps = 150;
    let r = run_fraud(&mut Session::in_memory(cfg))?;
    println!("source {}, {} train / {} test, {} steps", r.source, r.n_train, r.n_test, r.steps);
    println!("threshold {:.2}: {:?}", r.threshold, r.confusion);
    println!("ROC AUC {:.4}, monotone {}", r.auc, r.roc_monotone);
    Ok(())
}
