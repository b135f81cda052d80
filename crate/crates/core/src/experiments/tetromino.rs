//! Two-mode image generation: seven coherent inputs to seven tetromino states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Session;
use super::curve::{qnn_snapshot, train_config};
use super::data::{coherent_overlap, image_state, tetromino_image, tetromino_input_phases, tetromino_inputs, TETROMINO_ORDER};
use super::plotdata::{write_csv, write_json, write_pgm};
use crate::error::Result;
use crate::fock::FockState;
use crate::learn::{projected_fidelity, InputSource, LossSpec, LossVariant, QnnModel, Targets};
use crate::network::{Architecture, LayerParams, Readout};

pub fn tetromino_model(cfg_layers: usize, cutoff: usize, image_size: usize, alpha: f64, init_std: f64, gamma: f64, rng: &mut ChaCha8Rng) -> Result<QnnModel> {
    let layers = (0..cfg_layers).map(|_| LayerParams::random(2, init_std, rng)).collect();
    let mut arch = Architecture::feedforward(layers, cutoff);
    arch.readout = Readout::PhotonBox(image_size);
    let inputs = tetromino_inputs(alpha, cutoff)?;
    let targets = (0..7).map(|k| image_state(&tetromino_image(k, image_size)?)).collect::<Result<Vec<_>>>()?;
    let loss = LossSpec { gamma, ..LossSpec::new(LossVariant::ImageFidelity) };
    QnnModel::new(arch, InputSource::States(inputs), Targets::States(targets), loss)
}

/// Photon-number distribution `|⟨i,j|ψ⟩|²` as a `k × k` grid.
pub fn probability_grid(s: &FockState, k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| s.photon_prob(&[i, j]).unwrap_or(0.0)).collect()).collect()
}

fn gram(states: &[FockState]) -> Result<Vec<Vec<crate::C64>>> {
    states.iter().map(|a| states.iter().map(|b| a.inner(b)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeResult {
    pub shape: char,
    pub fidelity: f64,
    /// Probability of the output lying in the image box.
    pub box_probability: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetrominoReport {
    pub cutoff: usize,
    pub layers: usize,
    pub image_size: usize,
    pub shapes: Vec<ShapeResult>,
    pub mean_fidelity: f64,
    /// `max |⟨out_i|out_j⟩ − ⟨in_i|in_j⟩|` over the truncated states.
    pub gram_error: f64,
    /// Output Gram matrix against the exact coherent overlaps `⟨φ_i|φ_j⟩`.
    pub gram_error_exact: f64,
    /// Truncated input Gram matrix against the exact coherent overlaps.
    pub input_truncation_error: f64,
}

pub fn run_tetromino(session: &mut Session) -> Result<TetrominoReport> {
    let cfg = session.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = tetromino_model(cfg.layers, cfg.cutoff, cfg.image_size, cfg.alpha, cfg.init_std, cfg.gamma, &mut rng)?;
    let st = session.train("tetromino", &mut model, &train_config(&cfg, cfg.optimizer_spec()), qnn_snapshot)?;
    let items: Vec<usize> = (0..7).collect();
    let outputs = model.outputs(&st.params, &items)?;
    let (InputSource::States(inputs), Targets::States(targets)) = (&model.inputs, &model.targets) else {
        unreachable!("built with state inputs and targets")
    };
    let mut shapes = Vec::new();
    for ((o, t), c) in outputs.iter().zip(targets).zip(TETROMINO_ORDER.chars()) {
        let (fidelity, box_probability) = projected_fidelity(o, t)?;
        shapes.push(ShapeResult { shape: c, fidelity, box_probability, trace: o.trace });
    }
    let g_in = gram(inputs)?;
    let g_out = gram(&outputs)?;
    let mut gram_error: f64 = 0.0;
    let mut gram_error_exact: f64 = 0.0;
    let mut input_truncation_error: f64 = 0.0;
    let phases = tetromino_input_phases();
    for i in 0..7 {
        for j in 0..7 {
            gram_error = gram_error.max((g_in[i][j] - g_out[i][j]).norm());
            let (a, b) = (phases[i], phases[j]);
            let exact = coherent_overlap(a.0 * cfg.alpha, b.0 * cfg.alpha) * coherent_overlap(a.1 * cfg.alpha, b.1 * cfg.alpha);
            gram_error_exact = gram_error_exact.max((g_out[i][j] - exact).norm());
            input_truncation_error = input_truncation_error.max((g_in[i][j] - exact).norm());
        }
    }
    let mean_fidelity = shapes.iter().map(|s| s.fidelity).sum::<f64>() / 7.0;
    let report = TetrominoReport {
        cutoff: cfg.cutoff,
        layers: cfg.layers,
        image_size: cfg.image_size,
        shapes,
        mean_fidelity,
        gram_error,
        gram_error_exact,
        input_truncation_error,
    };
    if session.persist {
        let out = session.out().to_path_buf();
        for (o, c) in outputs.iter().zip(TETROMINO_ORDER.chars()) {
            let full = probability_grid(o, cfg.cutoff);
            let (proj, _) = o.project_box(cfg.image_size)?;
            let boxed = probability_grid(&proj, cfg.image_size);
            for (name, g) in [("full", &full), ("box", &boxed)] {
                write_csv(&out.join(format!("tetromino_{c}_{name}.csv")), &grid_header(g.len()), g)?;
                write_pgm(&out.join(format!("tetromino_{c}_{name}.pgm")), g, 16)?;
            }
        }
        let rows: Vec<Vec<String>> = report
            .shapes
            .iter()
            .map(|s| vec![s.shape.to_string(), s.fidelity.to_string(), s.box_probability.to_string(), s.trace.to_string()])
            .collect();
        write_csv(&out.join("tetromino_shapes.csv"), "shape,fidelity,box_probability,trace", &rows)?;
        write_json(&out.join("summary.json"), &report)?;
    }
    Ok(report)
}

/// Column names `n2_0..n2_{k-1}`; rows are `n1 = 0..k-1`.
fn grid_header(k: usize) -> String {
    (0..k).map(|j| format!("n2_{j}")).collect::<Vec<_>>().join(",")
}
