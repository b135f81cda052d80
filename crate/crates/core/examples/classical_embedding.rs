//! Compiles an affine map `x ↦ W x + b` into a single Gaussian layer acting on
//! squeezed position surrogates, then checks the homodyne means.
use cvqnn::network::{embed_classical, Nonlinearity};
use cvqnn::C64;
use nalgebra::{DMatrix, DVector};

fn main() -> cvqnn::Result<()> {
    let w = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.2, 0.9]);
    let b = DVector::from_vec(vec![0.1, -0.2]);
    let arch = embed_classical(&w, &b, Nonlinearity::Kerr, 40)?;
    let layer = &arch.layers[0];
    println!("squeezing per mode {:?}", layer.squeeze_mag);

    for x in [[0.0, 0.0], [0.5, -0.3], [-0.4, 0.2]] {
        let input = arch.encode(&[C64::new(x[0], 0.0), C64::new(x[1], 0.0)])?;
        let out = arch.forward(&input)?;
        let want = &w * DVector::from_row_slice(&x) + &b;
        println!("x = {x:?}: ⟨x̂⟩ = ({:+.4}, {:+.4})  W x + b = ({:+.4}, {:+.4})  trace {:.4}",
            out.expect_x(0)?, out.expect_x(1)?, want[0], want[1], out.measure_trace());
    }
    Ok(())
}
