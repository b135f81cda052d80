//! Sends a coherent state and a single photon through the pure-loss channel.
use cvqnn::fock::FockState;
use cvqnn::C64;

fn main() -> cvqnn::Result<()> {
    let d = 20;
    for eta in [0.0, 0.1, 0.3, 0.6] {
        let mut coh = FockState::coherent(&[C64::new(1.0, 0.5)], d)?;
        let n0 = coh.expect_n(0)?;
        coh.loss(eta, 0)?;
        let mut one = FockState::fock(&[1], d)?;
        one.loss(eta, 0)?;
        println!("η = {eta:.1}: coherent ⟨n⟩ {:.4} (expect {:.4}), |1⟩ keeps the photon with p {:.4}, trace {:.6}",
            coh.expect_n(0)?, (1.0 - eta) * n0, one.photon_prob(&[1])?, one.measure_trace());
    }
    Ok(())
}
