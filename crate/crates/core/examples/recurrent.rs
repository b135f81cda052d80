//! Unrolls a recurrent network whose shared layer couples one io mode with
//! one memory mode, printing the io response to a short input sequence.
use cvqnn::network::{recurrent_unroll, Architecture, LayerParams, Wiring};
use cvqnn::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cvqnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layer = LayerParams::random(2, 0.3, &mut rng);
    let mut arch = Architecture::feedforward(vec![layer], 12);
    arch.wiring = Wiring::Recurrent { steps: 5, io_modes: 1, memory_modes: 1 };

    let inputs: Vec<Vec<C64>> = [0.8, 0.0, 0.0, -0.5, 0.0].iter().map(|&x| vec![C64::new(x, 0.0)]).collect();
    let outs = recurrent_unroll(&arch, &inputs)?;
    for (t, (x, s)) in inputs.iter().zip(&outs).enumerate() {
        println!("t = {t}: input {:+.2}  io ⟨x⟩ {:+.4}  memory ⟨n⟩ {:.4}  trace {:.4}",
            x[0].re, s.expect_x(0)?, s.expect_n(1)?, s.measure_trace());
    }
    Ok(())
}
