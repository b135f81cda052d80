//! Classical encoder plus quantum decoder learning a phase-space code for
//! the Fock states `|0⟩, |1⟩, |2⟩`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Session;
use super::curve::{qnn_snapshot, train_config};
use super::plotdata::{write_csv, write_json};
use crate::classical::{Activation, Mlp};
use crate::error::Result;
use crate::fock::FockState;
use crate::learn::{clip_radius, projected_fidelity, CostBreakdown, InputSource, LossSpec, LossVariant, NelderMead, OptimizerSpec, QnnModel, Targets};
use crate::network::{Architecture, LayerMask, LayerParams};

/// Encoder widths: one-hot input, six hidden layers of five, `(x, p)`.
pub const ENCODER: [usize; 8] = [3, 5, 5, 5, 5, 5, 5, 2];

pub const N_FOCK: usize = 3;

pub fn autoencoder_model(layers: usize, cutoff: usize, clip: f64, init_std: f64, gamma: f64, rng: &mut ChaCha8Rng) -> Result<QnnModel> {
    let net = Mlp::glorot(&ENCODER, Activation::Elu, Activation::Identity, rng);
    let mut input = LayerParams::identity(1);
    input.mask = LayerMask { u1: false, squeeze: false, u2: false, displacement: true, nonlinear: false };
    let mut ls = vec![input];
    ls.extend((0..layers).map(|_| LayerParams::random(1, init_std, rng)));
    let arch = Architecture::feedforward(ls, cutoff);
    let features = (0..N_FOCK).map(|k| (0..N_FOCK).map(|j| f64::from(u8::from(j == k))).collect()).collect();
    let targets = (0..N_FOCK).map(|k| FockState::fock(&[k], N_FOCK)).collect::<Result<Vec<_>>>()?;
    let loss = LossSpec { gamma, ..LossSpec::new(LossVariant::FockFidelity) };
    QnnModel::new(arch, InputSource::Hybrid { net, features, clip: Some(clip) }, Targets::States(targets), loss)
}

/// The quantum decoder alone: displaced vacuum through the trained layers.
pub struct Decoder {
    arch: Architecture,
}

impl Decoder {
    pub fn new(model: &QnnModel, params: &[f64]) -> Result<Self> {
        Ok(Self { arch: model.instantiate(params)?.1 })
    }

    pub fn output(&self, x: f64, p: f64) -> Result<FockState> {
        let mut a = self.arch.clone();
        a.layers[0].disp_re[0] = x;
        a.layers[0].disp_im[0] = p;
        a.forward(&FockState::vacuum(1, a.cutoff)?)
    }

    /// Fidelities with `|0⟩, |1⟩, |2⟩` of the output projected onto the first
    /// three levels and renormalised.
    pub fn fidelities(&self, x: f64, p: f64) -> Result<[f64; N_FOCK]> {
        projected_fidelities(&self.output(x, p)?)
    }

    /// Fidelities of the whole output state, without the projection.
    pub fn raw_fidelities(&self, x: f64, p: f64) -> Result<[f64; N_FOCK]> {
        let s = self.output(x, p)?;
        let mut f = [0.0; N_FOCK];
        for (k, v) in f.iter_mut().enumerate() {
            *v = s.fidelity(&FockState::fock(&[k], s.cutoff)?)?;
        }
        Ok(f)
    }
}

fn projected_fidelities(s: &FockState) -> Result<[f64; N_FOCK]> {
    let mut f = [0.0; N_FOCK];
    for (k, v) in f.iter_mut().enumerate() {
        *v = projected_fidelity(s, &FockState::fock(&[k], N_FOCK)?)?.0;
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockResult {
    pub n: usize,
    /// Fidelity after projecting onto the first three levels.
    pub best_fidelity: f64,
    /// Fidelity of the unprojected output at the same displacement.
    pub raw_fidelity: f64,
    pub displacement: [f64; 2],
    /// Norm fraction of the odd part of the output wavefunction.
    pub odd_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderReport {
    pub cutoff: usize,
    pub layers: usize,
    pub clip: f64,
    pub results: Vec<FockResult>,
    /// Distances between optimal displacements: (0,1), (0,2), (1,2).
    pub separations: [f64; 3],
    /// Connected regions of the grid where each Fock state has the highest fidelity.
    pub regions: [usize; N_FOCK],
    /// Fidelities reached by the full autoencoder on its three inputs.
    pub encoder_fidelities: Vec<f64>,
}

fn odd_weight(psi: &[crate::C64]) -> f64 {
    let n = psi.len();
    let (mut odd, mut all) = (0.0, 0.0);
    for i in 0..n {
        let o = (psi[i] - psi[n - 1 - i]) * 0.5;
        odd += o.norm_sqr();
        all += psi[i].norm_sqr();
    }
    if all > 0.0 {
        odd / all
    } else {
        0.0
    }
}

/// 4-connected components of each label on a grid; `None` cells are outside the disk.
pub fn count_regions(labels: &[Vec<Option<usize>>], n_labels: usize) -> Vec<usize> {
    let h = labels.len();
    let w = labels.first().map_or(0, Vec::len);
    let mut seen = vec![vec![false; w]; h];
    let mut counts = vec![0; n_labels];
    for i in 0..h {
        for j in 0..w {
            let Some(l) = labels[i][j] else { continue };
            if seen[i][j] {
                continue;
            }
            counts[l] += 1;
            let mut stack = vec![(i, j)];
            seen[i][j] = true;
            while let Some((a, b)) = stack.pop() {
                let mut nb = Vec::with_capacity(4);
                if a > 0 {
                    nb.push((a - 1, b));
                }
                if a + 1 < h {
                    nb.push((a + 1, b));
                }
                if b > 0 {
                    nb.push((a, b - 1));
                }
                if b + 1 < w {
                    nb.push((a, b + 1));
                }
                for (c, d) in nb {
                    if !seen[c][d] && labels[c][d] == Some(l) {
                        seen[c][d] = true;
                        stack.push((c, d));
                    }
                }
            }
        }
    }
    counts
}

pub fn run_autoencoder(session: &mut Session) -> Result<AutoencoderReport> {
    let cfg = session.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = autoencoder_model(cfg.layers, cfg.cutoff, cfg.clip, cfg.init_std, cfg.gamma, &mut rng)?;
    let st = session.train("autoencoder", &mut model, &train_config(&cfg, cfg.optimizer_spec()), qnn_snapshot)?;
    let dec = Decoder::new(&model, &st.params)?;

    let encoder_fidelities = {
        let outs = model.outputs(&st.params, &[0, 1, 2])?;
        outs.iter().enumerate().map(|(k, s)| Ok(projected_fidelities(s)?[k])).collect::<Result<Vec<_>>>()?
    };

    let n = cfg.grid;
    let coord = |i: usize| -cfg.clip + 2.0 * cfg.clip * i as f64 / (n - 1) as f64;
    let mut grid_rows = Vec::new();
    let mut labels = vec![vec![None; n]; n];
    let mut best = [(f64::NEG_INFINITY, [0.0, 0.0]); N_FOCK];
    for i in 0..n {
        for j in 0..n {
            let (x, p) = (coord(i), coord(j));
            if x * x + p * p > cfg.clip * cfg.clip + 1e-12 {
                continue;
            }
            let f = dec.fidelities(x, p)?;
            let arg = (0..N_FOCK).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap_or(0);
            labels[i][j] = Some(arg);
            for k in 0..N_FOCK {
                if f[k] > best[k].0 {
                    best[k] = (f[k], [x, p]);
                }
            }
            grid_rows.push(vec![x, p, f[0], f[1], f[2], arg as f64]);
        }
    }

    // refine each grid optimum inside the disk
    let mut results = Vec::new();
    let xs: Vec<f64> = (0..=180).map(|k| -4.5 + 0.05 * k as f64).collect();
    let mut wave_rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    for (k, b) in best.iter().enumerate() {
        let mut eval = |v: &[f64]| -> Result<CostBreakdown> {
            let mut v = v.to_vec();
            clip_radius(&mut v, cfg.clip);
            Ok(CostBreakdown::plain(-dec.fidelities(v[0], v[1])?[k]))
        };
        let spec = OptimizerSpec::nelder_mead(2.0 * cfg.clip / (n - 1) as f64);
        let mut nm = NelderMead::new(&b.1, &spec, &mut eval)?;
        for _ in 0..60 {
            nm.iterate(&mut eval)?;
        }
        let mut v = nm.best().x.clone();
        clip_radius(&mut v, cfg.clip);
        let f = dec.fidelities(v[0], v[1])?[k];
        let (fid, disp) = if f >= b.0 { (f, [v[0], v[1]]) } else { (b.0, b.1) };
        let psi = dec.output(disp[0], disp[1])?.wavefunction(&xs)?;
        for (row, a) in wave_rows.iter_mut().zip(&psi) {
            row.push(a.re);
        }
        let raw_fidelity = dec.raw_fidelities(disp[0], disp[1])?[k];
        results.push(FockResult { n: k, best_fidelity: fid, raw_fidelity, displacement: disp, odd_weight: odd_weight(&psi) });
    }
    let d = |a: usize, b: usize| {
        let (u, v) = (results[a].displacement, results[b].displacement);
        ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt()
    };
    let separations = [d(0, 1), d(0, 2), d(1, 2)];
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let (u, v) = (results[a].displacement, results[b].displacement);
        let psi = dec.output((u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0)?.wavefunction(&xs)?;
        for (row, a) in wave_rows.iter_mut().zip(&psi) {
            row.push(a.re);
        }
    }
    let rc = count_regions(&labels, N_FOCK);
    let report = AutoencoderReport {
        cutoff: cfg.cutoff,
        layers: cfg.layers,
        clip: cfg.clip,
        results,
        separations,
        regions: [rc[0], rc[1], rc[2]],
        encoder_fidelities,
    };
    if session.persist {
        let out = session.out().to_path_buf();
        write_csv(&out.join("phase_space_fidelity.csv"), "x,p,f0,f1,f2,argmax", &grid_rows)?;
        write_csv(&out.join("wavefunctions.csv"), "x,best0,best1,best2,mid01,mid02,mid12", &wave_rows)?;
        write_json(&out.join("summary.json"), &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::Model;

    #[test]
    fn encoder_drives_displacement_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = autoencoder_model(3, 8, 1.5, 0.05, 100.0, &mut rng).unwrap();
        assert_eq!(m.arch.layers[0].num_params(), 2);
        assert_eq!(m.num_params(), m.n_classical() + 3 * 7);
        assert_eq!(m.dataset_len(), 3);
    }

    #[test]
    fn regions_and_odd_weight() {
        let l = vec![vec![Some(0), Some(0), Some(1)], vec![Some(1), None, Some(1)], vec![Some(0), Some(2), Some(2)]];
        assert_eq!(count_regions(&l, 3), vec![2, 2, 1]);
        let xs: Vec<f64> = (0..=40).map(|k| -4.0 + 0.2 * k as f64).collect();
        let one = FockState::fock(&[1], 5).unwrap().wavefunction(&xs).unwrap();
        assert!((odd_weight(&one) - 1.0).abs() < 1e-12);
        let zero = FockState::fock(&[0], 5).unwrap().wavefunction(&xs).unwrap();
        assert!(odd_weight(&zero) < 1e-12);
    }
}
