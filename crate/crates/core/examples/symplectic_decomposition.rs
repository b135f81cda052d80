//! Builds a random Gaussian circuit, reads off its symplectic matrix and
//! splits it into passive, squeezing and passive stages.
use cvqnn::symplectic::{bloch_messiah, orthosymplectic_residual, symplectic_residual, GateSpec, SymplecticAffine};
use cvqnn::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cvqnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 3;
    let mut word = Vec::new();
    for _ in 0..12 {
        let m = rng.gen_range(0..n);
        let other = (m + 1) % n;
        word.push(match rng.gen_range(0..4) {
            0 => GateSpec::rotation(m, rng.gen_range(-3.0..3.0)),
            1 => GateSpec::squeeze(m, rng.gen_range(-0.6..0.6), rng.gen_range(-3.0..3.0)),
            2 => GateSpec::beamsplitter(m, other, rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
            _ => GateSpec::displacement(m, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
        });
    }
    let m = SymplecticAffine::from_word(n, &word)?;
    println!("symplectic residual   {:.2e}", symplectic_residual(&m.matrix));
    println!("displacement          {:.4?}", m.displacement.as_slice());

    let e = bloch_messiah(&m)?;
    println!("singular values σ     {:?}", e.sigma);
    println!("squeezing r = −ln σ   {:?}", e.squeezing());
    println!("reconstruction error  {:.2e}", (e.reconstruct() - &m.matrix).abs().max());
    println!("K1, K2 orthosymplectic {:.2e} {:.2e}", orthosymplectic_residual(&e.k1), orthosymplectic_residual(&e.k2));
    Ok(())
}
