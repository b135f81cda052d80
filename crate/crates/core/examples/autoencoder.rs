//! Hybrid autoencoder: a quantum encoder maps |0⟩, |1⟩, |2⟩ to displacements
//! that a shared quantum decoder turns back into the same Fock states.
use cvqnn::experiments::autoencoder::run_autoencoder;
use cvqnn::experiments::{Experiment, ExperimentConfig, Preset, Session};

fn main() -> cvqnn::Result<()> {
    let cfg = ExperimentConfig::preset(Experiment::Autoencoder, Preset::Desk);
    let r = run_autoencoder(&mut Session::in_memory(cfg))?;
    for f in &r.results {
        println!("|{}⟩: best fidelity {:.4} at α = ({:+.3}, {:+.3}), odd weight {:.3}",
            f.n, f.best_fidelity, f.displacement[0], f.displacement[1], f.odd_weight);
    }
    println!("separations {:.3?}, regions {:?}", r.separations, r.regions);
    println!("encoder fidelities {:.4?}", r.encoder_fidelities);
    Ok(())
}
