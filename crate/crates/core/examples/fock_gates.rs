//! Applies single- and two-mode gates to a truncated Fock state and compares
//! the quadrature means with the phase-space prediction.
use cvqnn::fock::{gate_matrix, FockState};
use cvqnn::symplectic::{Gate, GateSpec, SymplecticAffine};
use cvqnn::C64;
use nalgebra::DVector;

fn main() -> cvqnn::Result<()> {
    let d = 24;
    let alpha = [C64::new(0.6, -0.2), C64::new(-0.3, 0.4)];
    let mut s = FockState::coherent(&alpha, d)?;
    let word = [
        GateSpec::squeeze(0, 0.3, 0.5),
        GateSpec::beamsplitter(0, 1, 0.7, 0.2),
        GateSpec::rotation(1, 1.1),
        GateSpec::displacement(1, C64::new(0.2, 0.1)),
    ];
    for g in &word {
        s.apply(&gate_matrix(&g.gate, d)?, &g.modes)?;
    }
    let z = DVector::from_vec(vec![alpha[0].re, alpha[1].re, alpha[0].im, alpha[1].im]);
    let want = SymplecticAffine::from_word(2, &word)?.apply(&z);
    for m in 0..2 {
        println!("mode {m}: ⟨x⟩ {:+.6} (phase space {:+.6})  ⟨p⟩ {:+.6} (phase space {:+.6})",
            s.expect_x(m)?, want[m], s.expect_p(m)?, want[m + 2]);
    }
    println!("trace after Gaussian gates {:.8}", s.measure_trace());

    // the Kerr gate is diagonal in the number basis, so ⟨n⟩ is unchanged
    let before = s.expect_n(0)?;
    s.apply(&gate_matrix(&Gate::Kerr { kappa: 0.4 }, d)?, &[0])?;
    println!("⟨n₀⟩ before/after Kerr {:.6} {:.6}", before, s.expect_n(0)?);
    s.apply(&gate_matrix(&Gate::CubicPhase { gamma: 0.1 }, d)?, &[1])?;
    println!("trace after cubic phase {:.6}", s.measure_trace());
    Ok(())
}
