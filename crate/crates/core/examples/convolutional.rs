//! Builds a translation-invariant Gaussian layer from circulant generator
//! blocks and shows that its symplectic matrix has Toeplitz blocks.
use cvqnn::network::conv_layer_from_kernel;
use cvqnn::symplectic::{circulant, toeplitz_blocks_check, toeplitz_residual};

fn main() -> cvqnn::Result<()> {
    let n = 4;
    let hxx = circulant(&[0.4, 0.1, 0.0, 0.1]);
    let hpp = circulant(&[0.3, -0.05, 0.0, -0.05]);
    let hxp = circulant(&[0.2, 0.05, 0.0, 0.05]);
    let hpx = hxp.transpose();
    let layer = conv_layer_from_kernel(&hxx, &hxp, &hpx, &hpp, 1.0)?;
    println!("beamsplitters per interferometer {}", layer.u1.num_beamsplitters());
    println!("squeezing {:?}", layer.squeeze_mag);

    let m = layer.gaussian_affine()?.matrix;
    println!("Toeplitz residual {:.2e}, Toeplitz blocks {}", toeplitz_residual(&m), toeplitz_blocks_check(&m));
    println!("x-x block row 0 {:.4}", m.view((0, 0), (1, n)).clone_owned());
    println!("x-x block row 1 {:.4}", m.view((1, 0), (1, n)).clone_owned());

    let mut broken = hxx.clone();
    broken[(0, 1)] += 0.05;
    broken[(1, 0)] += 0.05;
    match conv_layer_from_kernel(&broken, &hxp, &hpx, &hpp, 1.0) {
        Ok(_) => println!("perturbed kernel accepted"),
        Err(e) => println!("perturbed kernel rejected: {e}"),
    }
    Ok(())
}
