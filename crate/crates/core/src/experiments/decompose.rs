//! Euler decomposition of a random Gaussian layer and mesh compilation of its
//! passive parts.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Session;
use super::plotdata::write_json;
use crate::error::Result;
use crate::network::interferometer::InterferometerParams;
use crate::network::LayerParams;
use crate::symplectic::{bloch_messiah, orthosymplectic_residual, passive_symplectic, symplectic_residual, symplectic_to_unitary, SymplecticAffine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    pub modes: usize,
    pub symplectic_residual: f64,
    pub sigma: Vec<f64>,
    pub squeezing: Vec<f64>,
    /// `max |K₂ Σ K₁ − M|`.
    pub reconstruction_error: f64,
    pub k1_residual: f64,
    pub k2_residual: f64,
    /// `max |K − mesh(K)|` for the compiled interferometers.
    pub mesh_error: [f64; 2],
    pub matrix: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    pub mesh: [InterferometerParams; 2],
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn run_decompose(session: &mut Session) -> Result<DecomposeReport> {
    let cfg = session.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let layer = LayerParams::random(cfg.modes, 0.5, &mut rng);
    let affine = SymplecticAffine::from_word(cfg.modes, &layer.gaussian_word())?;
    let e = bloch_messiah(&affine)?;
    let mut mesh_error = [0.0; 2];
    let mut meshes = Vec::new();
    for (i, k) in [&e.k1, &e.k2].into_iter().enumerate() {
        let p = InterferometerParams::from_unitary(&symplectic_to_unitary(k))?;
        mesh_error[i] = max_abs(&(passive_symplectic(&p.mode_matrix()) - k));
        meshes.push(p);
    }
    let report = DecomposeReport {
        modes: cfg.modes,
        symplectic_residual: symplectic_residual(&affine.matrix),
        squeezing: e.squeezing(),
        reconstruction_error: max_abs(&(e.reconstruct() - &affine.matrix)),
        k1_residual: orthosymplectic_residual(&e.k1),
        k2_residual: orthosymplectic_residual(&e.k2),
        mesh_error,
        sigma: e.sigma.clone(),
        matrix: affine.matrix.clone(),
        k1: e.k1.clone(),
        k2: e.k2.clone(),
        mesh: [meshes[0].clone(), meshes[1].clone()],
    };
    if session.persist {
        std::fs::create_dir_all(session.out())?;
        write_json(&session.out().join("summary.json"), &report)?;
    }
    Ok(report)
}
