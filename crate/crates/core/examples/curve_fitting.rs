//! Fits a noisy sine with a single-mode network read out by homodyne
//! detection. Pass a step count to train longer.
use cvqnn::experiments::curve::run_curvefit;
use cvqnn::experiments::{Experiment, ExperimentConfig, Preset, Session};

fn main() -> cvqnn::Result<()> {
    let mut cfg = ExperimentConfig::preset(Experiment::Curvefit, Preset::Desk);
    cfg.steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    cfg.depths.clear();
    let report = run_curvefit(&mut Session::in_memory(cfg))?;
    let f = &report.fit;
    println!("{} layers, cutoff {}, {} steps", f.layers, report.cutoff, report.steps);
    println!("train MSE {:.4}  test MSE vs noiseless {:.4}  vs noisy {:.4}", f.train_mse, f.test_mse, f.test_mse_noisy);
    Ok(())
}
