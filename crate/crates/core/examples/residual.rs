//! A residual block maps `|x⟩|0⟩` to `|x⟩|x + φ(x)⟩`; this prints the carrier
//! mean for a few inputs and a quadratic `φ`.
use cvqnn::fock::{gates, xeigen_amplitudes, FockState};
use cvqnn::C64;
use cvqnn::network::{residual_block, DEFAULT_SURROGATE_SQUEEZE};

fn main() -> cvqnn::Result<()> {
    let d = 40;
    let poly = [0.0, 0.2, 0.3];
    for x in [-0.6, -0.2, 0.0, 0.4, 0.8] {
        let signal = xeigen_amplitudes(x, DEFAULT_SURROGATE_SQUEEZE, d)?;
        let carrier = gates::coherent_amplitudes(C64::new(0.0, 0.0), d);
        let input = FockState::product_of(&[signal, carrier], d)?;
        let out = residual_block(&input, &poly)?;
        let phi = poly[0] + poly[1] * x + poly[2] * x * x;
        println!("x = {x:+.1}: carrier ⟨x⟩ {:+.4}  x + φ(x) {:+.4}  trace {:.4}", out.expect_x(1)?, x + phi, out.measure_trace());
    }
    Ok(())
}
