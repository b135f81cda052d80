//! The layer ansatz `Φ ∘ D ∘ U₂ ∘ S ∘ U₁`, architecture wiring, and the
//! compiler from classical affine layers to Gaussian circuits.

pub mod interferometer;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{gate_matrix, gates, xeigen_amplitudes, FockState};
use crate::linalg::C64;
use crate::symplectic::{
    bloch_messiah, symplectic_to_unitary, translation_invariant_symplectic, Gate, GateSpec, SymplecticAffine,
};
pub use interferometer::{mesh_pairs, InterferometerParams};

/// Default squeezing of the finitely squeezed `|x⟩` surrogates.
pub const DEFAULT_SURROGATE_SQUEEZE: f64 = 1.5;

/// Non-Gaussian stage of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Nonlinearity {
    #[default]
    Kerr,
    CubicPhase,
}

impl Nonlinearity {
    pub fn gate(self, strength: f64) -> Gate {
        match self {
            Nonlinearity::Kerr => Gate::Kerr { kappa: strength },
            Nonlinearity::CubicPhase => Gate::CubicPhase { gamma: strength },
        }
    }
}

/// Which parameter groups of a layer are trainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMask {
    pub u1: bool,
    pub squeeze: bool,
    pub u2: bool,
    pub displacement: bool,
    pub nonlinear: bool,
}

impl Default for LayerMask {
    fn default() -> Self {
        Self { u1: true, squeeze: true, u2: true, displacement: true, nonlinear: true }
    }
}

/// Parameters of one layer on `n_modes` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub n_modes: usize,
    pub u1: InterferometerParams,
    pub squeeze_mag: Vec<f64>,
    pub squeeze_phase: Vec<f64>,
    pub u2: InterferometerParams,
    pub disp_re: Vec<f64>,
    pub disp_im: Vec<f64>,
    pub kerr: Vec<f64>,
    pub mask: LayerMask,
}

/// Role of a flattened parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Angle,
    SqueezeMagnitude,
    Displacement,
    Nonlinear,
}

impl ParamKind {
    /// Squeeze, displacement and nonlinear strengths raise the photon number.
    pub fn is_active(self) -> bool {
        !matches!(self, ParamKind::Angle)
    }
}

fn interferometer_values(p: &InterferometerParams) -> impl Iterator<Item = &f64> {
    p.bs_theta.iter().chain(&p.bs_phi).chain(&p.rotations)
}

fn interferometer_values_mut(p: &mut InterferometerParams) -> impl Iterator<Item = &mut f64> {
    p.bs_theta.iter_mut().chain(p.bs_phi.iter_mut()).chain(p.rotations.iter_mut())
}

impl LayerParams {
    /// All-zero parameters: the identity layer.
    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            u1: InterferometerParams::identity(n_modes),
            squeeze_mag: vec![0.0; n_modes],
            squeeze_phase: vec![0.0; n_modes],
            u2: InterferometerParams::identity(n_modes),
            disp_re: vec![0.0; n_modes],
            disp_im: vec![0.0; n_modes],
            kerr: vec![0.0; n_modes],
            mask: LayerMask::default(),
        }
    }

    /// Angles uniform in `[0, 2π)`; squeeze, displacement and nonlinear strengths
    /// drawn from `N(0, mag_std²)`.
    pub fn random<R: Rng>(n_modes: usize, mag_std: f64, rng: &mut R) -> Self {
        let mut l = Self::identity(n_modes);
        let normal = Normal::new(0.0, mag_std.max(0.0)).expect("finite std");
        let two_pi = 2.0 * std::f64::consts::PI;
        for v in interferometer_values_mut(&mut l.u1) {
            *v = rng.gen::<f64>() * two_pi;
        }
        for v in l.squeeze_mag.iter_mut() {
            *v = normal.sample(rng);
        }
        for v in l.squeeze_phase.iter_mut() {
            *v = rng.gen::<f64>() * two_pi;
        }
        for v in interferometer_values_mut(&mut l.u2) {
            *v = rng.gen::<f64>() * two_pi;
        }
        for v in l.disp_re.iter_mut().chain(l.disp_im.iter_mut()).chain(l.kerr.iter_mut()) {
            *v = normal.sample(rng);
        }
        l
    }

    fn groups(&self) -> Vec<(bool, ParamKind, Vec<f64>)> {
        vec![
            (self.mask.u1, ParamKind::Angle, interferometer_values(&self.u1).copied().collect()),
            (self.mask.squeeze, ParamKind::SqueezeMagnitude, self.squeeze_mag.clone()),
            (self.mask.squeeze, ParamKind::Angle, self.squeeze_phase.clone()),
            (self.mask.u2, ParamKind::Angle, interferometer_values(&self.u2).copied().collect()),
            (self.mask.displacement, ParamKind::Displacement, self.disp_re.clone()),
            (self.mask.displacement, ParamKind::Displacement, self.disp_im.clone()),
            (self.mask.nonlinear, ParamKind::Nonlinear, self.kerr.clone()),
        ]
    }

    /// Trainable parameter values in canonical order
    /// (u1, squeeze magnitudes, squeeze phases, u2, displacement re, im, nonlinear).
    pub fn params(&self) -> Vec<f64> {
        self.groups().into_iter().filter(|g| g.0).flat_map(|g| g.2).collect()
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        self.groups().into_iter().filter(|g| g.0).flat_map(|g| vec![g.1; g.2.len()]).collect()
    }

    pub fn num_params(&self) -> usize {
        self.groups().iter().filter(|g| g.0).map(|g| g.2.len()).sum()
    }

    /// Overwrites the trainable parameters from `values`, returning how many were consumed.
    pub fn set_params(&mut self, values: &[f64]) -> Result<usize> {
        let need = self.num_params();
        if values.len() < need {
            return Err(Error::ParameterCountMismatch { expected: need, got: values.len() });
        }
        let mut it = values.iter().copied();
        let mask = self.mask;
        if mask.u1 {
            interferometer_values_mut(&mut self.u1).for_each(|v| *v = it.next().unwrap());
        }
        if mask.squeeze {
            self.squeeze_mag.iter_mut().for_each(|v| *v = it.next().unwrap());
            self.squeeze_phase.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        if mask.u2 {
            interferometer_values_mut(&mut self.u2).for_each(|v| *v = it.next().unwrap());
        }
        if mask.displacement {
            self.disp_re.iter_mut().for_each(|v| *v = it.next().unwrap());
            self.disp_im.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        if mask.nonlinear {
            self.kerr.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(need)
    }

    /// The layer as a gate word (every stage, including identities).
    pub fn gate_word(&self, nonlinearity: Nonlinearity) -> Vec<GateSpec> {
        let mut word = self.gaussian_word();
        for m in 0..self.n_modes {
            word.push(GateSpec::new(nonlinearity.gate(self.kerr[m]), vec![m]));
        }
        word
    }

    /// `D ∘ U₂ ∘ S ∘ U₁` as a gate word.
    pub fn gaussian_word(&self) -> Vec<GateSpec> {
        let n = self.n_modes;
        let mut word = self.u1.compile();
        for m in 0..n {
            word.push(GateSpec::squeeze(m, self.squeeze_mag[m], self.squeeze_phase[m]));
        }
        word.extend(self.u2.compile());
        for m in 0..n {
            word.push(GateSpec::displacement(m, C64::new(self.disp_re[m], self.disp_im[m])));
        }
        word
    }

    /// Phase-space map `z ↦ M z + α` of the Gaussian part.
    pub fn gaussian_affine(&self) -> Result<SymplecticAffine> {
        SymplecticAffine::from_word(self.n_modes, &self.gaussian_word())
    }
}

/// A gate matrix placed on modes.
#[derive(Debug, Clone)]
pub struct Op {
    pub matrix: DMatrix<C64>,
    pub modes: Vec<usize>,
}

/// A gate word lowered to Fock matrices, with runs of single-mode gates fused.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    pub n_modes: usize,
    pub cutoff: usize,
    pub ops: Vec<Op>,
}

fn is_identity_gate(g: &Gate) -> bool {
    match *g {
        Gate::Rotation { phi } => phi == 0.0,
        Gate::Displacement { alpha } => alpha == C64::new(0.0, 0.0),
        Gate::Squeeze { r, .. } => r == 0.0,
        Gate::Beamsplitter { theta, .. } => theta == 0.0,
        Gate::Kerr { kappa } => kappa == 0.0,
        Gate::CubicPhase { gamma } => gamma == 0.0,
        Gate::ControlledX { s } => s == 0.0,
    }
}

impl CompiledCircuit {
    pub fn compile(word: &[GateSpec], n_modes: usize, cutoff: usize) -> Result<Self> {
        let mut ops = Vec::new();
        let mut pending: Vec<Option<DMatrix<C64>>> = vec![None; n_modes];
        let flush = |m: usize, pending: &mut Vec<Option<DMatrix<C64>>>, ops: &mut Vec<Op>| {
            if let Some(mat) = pending[m].take() {
                ops.push(Op { matrix: mat, modes: vec![m] });
            }
        };
        for spec in word {
            spec.validate(n_modes)?;
            if is_identity_gate(&spec.gate) {
                continue;
            }
            let g = gate_matrix(&spec.gate, cutoff)?.entries;
            if spec.modes.len() == 1 {
                let m = spec.modes[0];
                pending[m] = Some(match pending[m].take() {
                    Some(prev) => g * prev,
                    None => g,
                });
            } else {
                for &m in &spec.modes {
                    flush(m, &mut pending, &mut ops);
                }
                ops.push(Op { matrix: g, modes: spec.modes.clone() });
            }
        }
        for m in 0..n_modes {
            flush(m, &mut pending, &mut ops);
        }
        Ok(Self { n_modes, cutoff, ops })
    }

    pub fn apply(&self, s: &mut FockState) -> Result<()> {
        if s.n_modes != self.n_modes || s.cutoff != self.cutoff {
            return Err(Error::DimensionMismatch(format!(
                "circuit on {} modes at cutoff {} applied to state with {} modes at cutoff {}",
                self.n_modes, self.cutoff, s.n_modes, s.cutoff
            )));
        }
        for op in &self.ops {
            s.apply_unchecked(&op.matrix, &op.modes);
        }
        Ok(())
    }
}

/// Applies one layer to a state.
pub fn layer_apply(s: &FockState, layer: &LayerParams, nonlinearity: Nonlinearity) -> Result<FockState> {
    if layer.n_modes != s.n_modes {
        return Err(Error::DimensionMismatch(format!(
            "{}-mode layer on {}-mode state",
            layer.n_modes, s.n_modes
        )));
    }
    let c = CompiledCircuit::compile(&layer.gate_word(nonlinearity), s.n_modes, s.cutoff)?;
    let mut out = s.clone();
    c.apply(&mut out)?;
    Ok(out)
}

/// How consecutive layers are connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wiring {
    Feedforward,
    /// Feedforward over layers whose Gaussian parts are translation invariant.
    Convolutional,
    /// One shared layer reused at every step; the first `io_modes` modes carry
    /// data in and out, the remaining `memory_modes` carry the internal state.
    Recurrent { steps: usize, io_modes: usize, memory_modes: usize },
    /// Two modes: layers act on the signal (mode 0) and after each layer a SUM
    /// gate adds the signal onto the carrier (mode 1), which is primed with a
    /// copy of the input. A single layer `F` thus maps `x` to `x + F(x)`.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputEncoding {
    /// Real data displaces the vacuum along `x`.
    DisplacedVacuum,
    /// Complex data are coherent amplitudes.
    CoherentList,
    /// Real data become finitely squeezed `|x⟩` surrogates.
    ClassicalEmbedded { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Readout {
    HomodyneX(usize),
    PhotonBox(usize),
    SinglePhotonPostselect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<LayerParams>,
    pub wiring: Wiring,
    pub encoding: InputEncoding,
    pub readout: Readout,
    pub nonlinearity: Nonlinearity,
    pub cutoff: usize,
    /// Loss fraction applied to every mode after every layer.
    pub layer_loss: f64,
}

/// Cache of compiled layers keyed by their exact parameter bits.
#[derive(Debug, Default)]
pub struct LayerCache {
    map: HashMap<(usize, usize, Vec<u64>), Arc<CompiledCircuit>>,
}

impl LayerCache {
    pub fn clear(&mut self) {
        self.map.clear();
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&mut self, layer: &LayerParams, nl: Nonlinearity, cutoff: usize) -> Result<Arc<CompiledCircuit>> {
        let word = layer.gate_word(nl);
        let mut key_bits = Vec::with_capacity(word.len() * 2 + 1);
        key_bits.push(nl as u64);
        for g in &word {
            match g.gate {
                Gate::Rotation { phi } => key_bits.push(phi.to_bits()),
                Gate::Displacement { alpha } => key_bits.extend([alpha.re.to_bits(), alpha.im.to_bits()]),
                Gate::Squeeze { r, phase } => key_bits.extend([r.to_bits(), phase.to_bits()]),
                Gate::Beamsplitter { theta, phi } => key_bits.extend([theta.to_bits(), phi.to_bits()]),
                Gate::Kerr { kappa } => key_bits.push(kappa.to_bits()),
                Gate::CubicPhase { gamma } => key_bits.push(gamma.to_bits()),
                Gate::ControlledX { s } => key_bits.push(s.to_bits()),
            }
        }
        let key = (layer.n_modes, cutoff, key_bits);
        if let Some(c) = self.map.get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(CompiledCircuit::compile(&word, layer.n_modes, cutoff)?);
        self.map.insert(key, c.clone());
        Ok(c)
    }
}

impl Architecture {
    pub fn feedforward(layers: Vec<LayerParams>, cutoff: usize) -> Self {
        Self {
            layers,
            wiring: Wiring::Feedforward,
            encoding: InputEncoding::DisplacedVacuum,
            readout: Readout::HomodyneX(0),
            nonlinearity: Nonlinearity::Kerr,
            cutoff,
            layer_loss: 0.0,
        }
    }

    pub fn input_modes(&self) -> usize {
        match self.wiring {
            Wiring::Residual => 2,
            _ => self.layers.first().map_or(0, |l| l.n_modes),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.num_params()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn param_kinds(&self) -> Vec<ParamKind> {
        self.layers.iter().flat_map(|l| l.param_kinds()).collect()
    }

    /// Index of the layer owning each flattened parameter.
    pub fn param_layers(&self) -> Vec<usize> {
        self.layers.iter().enumerate().flat_map(|(i, l)| vec![i; l.num_params()]).collect()
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let need = self.num_params();
        if values.len() != need {
            return Err(Error::ParameterCountMismatch { expected: need, got: values.len() });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            offset += l.set_params(&values[offset..])?;
        }
        Ok(())
    }

    /// Encodes one data point as the input state.
    pub fn encode(&self, data: &[C64]) -> Result<FockState> {
        let n = self.input_modes();
        let used = if self.wiring == Wiring::Residual { 1 } else { n };
        if data.len() != used {
            return Err(Error::DimensionMismatch(format!("{} inputs for {used} input modes", data.len())));
        }
        let d = self.cutoff;
        let mut singles: Vec<Vec<C64>> = match self.encoding {
            InputEncoding::DisplacedVacuum => data
                .iter()
                .map(|a| gates::coherent_amplitudes(C64::new(a.re, 0.0) / std::f64::consts::SQRT_2, d))
                .collect(),
            InputEncoding::CoherentList => {
                data.iter().map(|&a| gates::coherent_amplitudes(a / std::f64::consts::SQRT_2, d)).collect()
            }
            InputEncoding::ClassicalEmbedded { r } => {
                data.iter().map(|a| xeigen_amplitudes(a.re, r, d)).collect::<Result<_>>()?
            }
        };
        if self.wiring == Wiring::Residual {
            singles.push(gates::coherent_amplitudes(C64::new(0.0, 0.0), d));
        }
        FockState::product_of(&singles, d)
    }

    /// State entering the first layer; residual wiring primes the carrier here.
    pub fn entry(&self, mut s: FockState) -> Result<FockState> {
        if self.wiring == Wiring::Residual {
            self.sum_gate(&mut s)?;
        }
        Ok(s)
    }

    /// Runs the stack from layer `start` on, given the state entering that layer
    /// (for `start = 0`, the encoded input before [`Architecture::entry`]).
    pub fn forward_from(&self, start: usize, s: FockState, cache: &mut LayerCache) -> Result<FockState> {
        let mut s = if start == 0 { self.entry(s)? } else { s };
        for l in start..self.layers.len() {
            s = self.layer_step(l, s, cache)?;
        }
        Ok(s)
    }

    pub fn forward(&self, input: &FockState) -> Result<FockState> {
        self.forward_from(0, input.clone(), &mut LayerCache::default())
    }

    fn sum_gate(&self, s: &mut FockState) -> Result<()> {
        let g = gate_matrix(&Gate::ControlledX { s: 1.0 }, self.cutoff)?;
        s.apply(&g, &[0, 1])
    }

    pub fn compile_layer(&self, l: usize) -> Result<CompiledCircuit> {
        CompiledCircuit::compile(&self.layers[l].gate_word(self.nonlinearity), self.layers[l].n_modes, self.cutoff)
    }

    /// Applies layer `l` including width change, residual shortcut and loss.
    pub fn layer_step(&self, l: usize, s: FockState, cache: &mut LayerCache) -> Result<FockState> {
        let compiled = cache.get(&self.layers[l], self.nonlinearity, self.cutoff)?;
        self.layer_step_with(l, s, &compiled)
    }

    /// [`Architecture::layer_step`] with a precompiled circuit for layer `l`.
    pub fn layer_step_with(&self, l: usize, mut s: FockState, compiled: &CompiledCircuit) -> Result<FockState> {
        let layer = &self.layers[l];
        match self.wiring {
            Wiring::Residual => {
                if layer.n_modes != 1 || s.n_modes != 2 {
                    return Err(Error::DimensionMismatch("residual wiring uses 1-mode layers on 2 modes".into()));
                }
                for op in &compiled.ops {
                    s.apply_unchecked(&op.matrix, &op.modes);
                }
                self.sum_gate(&mut s)?;
            }
            _ => {
                if layer.n_modes > s.n_modes {
                    s = s.with_vacuum_modes(layer.n_modes - s.n_modes);
                } else if layer.n_modes < s.n_modes {
                    s = s.keep_modes(&(0..layer.n_modes).collect::<Vec<_>>())?;
                }
                compiled.apply(&mut s)?;
            }
        }
        if self.layer_loss > 0.0 {
            for m in 0..s.n_modes {
                s.loss(self.layer_loss, m)?;
            }
        }
        Ok(s)
    }
}

/// Unrolls a recurrent architecture over per-step io displacements.
///
/// Each step displaces the io modes (entering in vacuum) by the step's data,
/// applies the shared layer, records the full output state, then traces the io
/// modes out and replaces them with fresh vacuum.
pub fn recurrent_unroll(arch: &Architecture, inputs: &[Vec<C64>]) -> Result<Vec<FockState>> {
    let Wiring::Recurrent { io_modes, memory_modes, .. } = arch.wiring else {
        return Err(Error::InvalidArgument("recurrent_unroll needs recurrent wiring".into()));
    };
    if inputs.is_empty() {
        return Err(Error::StepCountZero);
    }
    let layer = arch.layers.first().ok_or(Error::StepCountZero)?;
    let n = io_modes + memory_modes;
    if layer.n_modes != n {
        return Err(Error::DimensionMismatch(format!("shared layer has {} modes, wiring needs {n}", layer.n_modes)));
    }
    let d = arch.cutoff;
    let mut cache = LayerCache::default();
    let compiled = cache.get(layer, arch.nonlinearity, d)?;
    let mut state = FockState::vacuum(n, d)?;
    let mut outputs = Vec::with_capacity(inputs.len());
    for x in inputs {
        if x.len() != io_modes {
            return Err(Error::DimensionMismatch(format!("{} inputs for {io_modes} io modes", x.len())));
        }
        for (m, &a) in x.iter().enumerate() {
            if a != C64::new(0.0, 0.0) {
                state.apply(&gate_matrix(&Gate::Displacement { alpha: a }, d)?, &[m])?;
            }
        }
        compiled.apply(&mut state)?;
        if arch.layer_loss > 0.0 {
            for m in 0..n {
                state.loss(arch.layer_loss, m)?;
            }
        }
        outputs.push(state.clone());
        if memory_modes == 0 {
            state = FockState::vacuum(n, d)?;
        } else {
            let memory = state.keep_modes(&(io_modes..n).collect::<Vec<_>>())?;
            state = memory.with_vacuum_front(io_modes);
        }
    }
    Ok(outputs)
}

/// `exp(−i φ(x̂₁) ⊗ p̂₂)` followed by a SUM gate: `|x⟩|0⟩ ↦ |x⟩|x + φ(x)⟩`.
/// `poly` holds the coefficients of `φ` in increasing degree.
pub fn residual_block(s: &FockState, poly: &[f64]) -> Result<FockState> {
    if s.n_modes != 2 {
        return Err(Error::DimensionMismatch("residual block acts on two modes".into()));
    }
    let d = s.cutoff;
    let phi = |x: f64| poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let mut out = s.clone();
    if poly.iter().any(|&c| c != 0.0) {
        let cond = gates::conditional_displacement(d, phi);
        out.apply_unchecked(&cond, &[0, 1]);
    }
    out.apply(&gate_matrix(&Gate::ControlledX { s: 1.0 }, d)?, &[0, 1])?;
    Ok(out)
}

/// Compiles `x ↦ W x + b` (square, full-rank `W`) into a single layer on `|x⟩`
/// surrogates: `W = O₂ Σ O₁`, phaseless `U₁ = O₁`, squeezes `r_i = −ln σ_i`,
/// phaseless `U₂ = O₂`, displacement `b`. The nonlinear stage is left at zero.
pub fn embed_classical(w: &DMatrix<f64>, b: &DVector<f64>, nonlinearity: Nonlinearity, cutoff: usize) -> Result<Architecture> {
    if !w.is_square() {
        return Err(Error::NonSquare { rows: w.nrows(), cols: w.ncols() });
    }
    let n = w.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!("bias of length {} for {n} modes", b.len())));
    }
    let svd = w.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (max, min) = (sv.max(), sv.min());
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond < 1e8) {
        return Err(Error::RankDeficient(cond));
    }
    let o2 = svd.u.expect("svd u");
    let o1 = svd.v_t.expect("svd v_t");
    let mut layer = LayerParams::identity(n);
    layer.u1 = InterferometerParams::from_orthogonal(&o1)?;
    layer.u2 = InterferometerParams::from_orthogonal(&o2)?;
    for i in 0..n {
        layer.squeeze_mag[i] = -sv[i].ln();
        layer.disp_re[i] = b[i];
    }
    Ok(Architecture {
        layers: vec![layer],
        wiring: Wiring::Feedforward,
        encoding: InputEncoding::ClassicalEmbedded { r: DEFAULT_SURROGATE_SQUEEZE },
        readout: Readout::HomodyneX(0),
        nonlinearity,
        cutoff,
        layer_loss: 0.0,
    })
}

/// Gaussian layer realising the translation-invariant symplectic map of the
/// given circulant generator blocks, via Bloch-Messiah.
pub fn conv_layer_from_kernel(
    hxx: &DMatrix<f64>,
    hxp: &DMatrix<f64>,
    hpx: &DMatrix<f64>,
    hpp: &DMatrix<f64>,
    t: f64,
) -> Result<LayerParams> {
    let m = translation_invariant_symplectic(hxx, hxp, hpx, hpp, t)?;
    let n = m.n_modes;
    let bm = bloch_messiah(&m)?;
    let mut layer = LayerParams::identity(n);
    layer.u1 = InterferometerParams::from_unitary(&symplectic_to_unitary(&bm.k1))?;
    layer.u2 = InterferometerParams::from_unitary(&symplectic_to_unitary(&bm.k2))?;
    layer.squeeze_mag = bm.squeezing();
    Ok(layer)
}

impl FockState {
    /// Prepends `k` vacuum modes; flat indices of existing amplitudes are unchanged.
    pub fn with_vacuum_front(&self, k: usize) -> FockState {
        let d = self.cutoff;
        let old = self.dim();
        let new = old * d.pow(k as u32);
        let body = match &self.body {
            crate::fock::Body::Pure(a) => {
                let mut v = a.clone();
                v.resize(new, C64::new(0.0, 0.0));
                crate::fock::Body::Pure(v)
            }
            crate::fock::Body::Mixed(r) => {
                let mut v = vec![C64::new(0.0, 0.0); new * new];
                for i in 0..old {
                    v[i * new..i * new + old].copy_from_slice(&r[i * old..(i + 1) * old]);
                }
                crate::fock::Body::Mixed(v)
            }
        };
        FockState { n_modes: self.n_modes + k, cutoff: d, body, trace: self.trace }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{circulant, compose, toeplitz_blocks_check};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn means(s: &FockState) -> Vec<f64> {
        let n = s.n_modes;
        (0..n).map(|m| s.expect_x(m).unwrap()).chain((0..n).map(|m| s.expect_p(m).unwrap())).collect()
    }

    #[test]
    fn parameter_counts() {
        let mut l = LayerParams::identity(2);
        assert_eq!(l.num_params(), 18);
        l.mask.u1 = false;
        assert_eq!(l.num_params(), 14);
        let n = 3;
        let l3 = LayerParams::identity(n);
        assert_eq!(l3.num_params(), 2 * (n * (n - 1) / 2 * 2 + n) + 4 * n + n);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l = LayerParams::random(2, 0.1, &mut rng);
        l.mask.u1 = false;
        let p = l.params();
        let mut other = LayerParams::identity(2);
        other.mask.u1 = false;
        other.u1 = l.u1.clone();
        other.set_params(&p).unwrap();
        assert_eq!(other, l);
    }

    #[test]
    fn zero_layer_is_identity_on_vacuum() {
        let v = FockState::vacuum(2, 6).unwrap();
        let out = layer_apply(&v, &LayerParams::identity(2), Nonlinearity::Kerr).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn kerr_layer_keeps_vacuum_trace() {
        let mut l = LayerParams::identity(1);
        l.kerr[0] = 0.1;
        let out = layer_apply(&FockState::vacuum(1, 8).unwrap(), &l, Nonlinearity::Kerr).unwrap();
        assert!(out.trace >= 1.0 - 1e-9);
    }

    #[test]
    fn gaussian_layer_matches_affine_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut l = LayerParams::random(2, 0.15, &mut rng);
        l.kerr = vec![0.0; 2];
        let input = [c(0.3, -0.2), c(-0.1, 0.4)];
        let s = FockState::coherent(&input, 20).unwrap();
        let out = layer_apply(&s, &l, Nonlinearity::Kerr).unwrap();
        let z = DVector::from_vec(vec![0.3, -0.1, -0.2, 0.4]);
        let want = l.gaussian_affine().unwrap().apply(&z);
        for (a, b) in means(&out).iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn single_gate_layers_reproduce_gates() {
        // a layer with one non-identity stage equals that gate alone
        let d = 10;
        let s = FockState::coherent(&[c(0.2, 0.1), c(-0.3, 0.2)], d).unwrap();
        let mut cases: Vec<(LayerParams, GateSpec)> = Vec::new();
        let mut l = LayerParams::identity(2);
        l.squeeze_mag[1] = 0.2;
        l.squeeze_phase[1] = 0.5;
        cases.push((l, GateSpec::squeeze(1, 0.2, 0.5)));
        let mut l = LayerParams::identity(2);
        l.u2.bs_theta[0] = 0.4;
        l.u2.bs_phi[0] = 0.3;
        cases.push((l, GateSpec::beamsplitter(0, 1, 0.4, 0.3)));
        let mut l = LayerParams::identity(2);
        l.kerr[0] = 0.3;
        cases.push((l, GateSpec::kerr(0, 0.3)));
        let mut l = LayerParams::identity(2);
        l.disp_im[0] = 0.5;
        cases.push((l, GateSpec::displacement(0, c(0.0, 0.5))));
        let mut l = LayerParams::identity(2);
        l.u1.rotations[1] = 1.1;
        cases.push((l, GateSpec::rotation(1, 1.1)));
        for (layer, gate) in cases {
            let a = layer_apply(&s, &layer, Nonlinearity::Kerr).unwrap();
            let mut b = s.clone();
            b.apply(&gate_matrix(&gate.gate, d).unwrap(), &gate.modes).unwrap();
            let f = a.inner(&b).unwrap().norm_sqr() / (a.trace * b.trace);
            assert!(f >= 1.0 - 1e-9, "{gate:?}: {f}");
        }
    }

    #[test]
    fn embed_identity_is_all_zero() {
        let arch = embed_classical(&DMatrix::identity(2, 2), &DVector::zeros(2), Nonlinearity::Kerr, 10).unwrap();
        let l = &arch.layers[0];
        assert!(l.params().iter().all(|&v| v == 0.0), "{:?}", l.params());
    }

    #[test]
    fn embed_diagonal_squeezes() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let arch = embed_classical(&w, &DVector::zeros(2), Nonlinearity::Kerr, 10).unwrap();
        let l = &arch.layers[0];
        let ln2 = 2f64.ln();
        assert!((l.squeeze_mag[0] + ln2).abs() < 1e-12 && (l.squeeze_mag[1] - ln2).abs() < 1e-12);
        assert!(interferometer_values(&l.u1).chain(interferometer_values(&l.u2)).all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn embed_errors() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            embed_classical(&w, &DVector::zeros(2), Nonlinearity::Kerr, 10),
            Err(Error::RankDeficient(_))
        ));
        let w = DMatrix::zeros(2, 3);
        assert!(matches!(
            embed_classical(&w, &DVector::zeros(2), Nonlinearity::Kerr, 10),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn embed_affine_part_is_w_plus_b() {
        let w = DMatrix::from_row_slice(2, 2, &[0.8, -0.6, 0.3, 1.2]);
        let b = DVector::from_vec(vec![0.2, -0.4]);
        let arch = embed_classical(&w, &b, Nonlinearity::Kerr, 10).unwrap();
        let aff = arch.layers[0].gaussian_affine().unwrap();
        let xx = aff.matrix.view((0, 0), (2, 2)).into_owned();
        assert!((xx - &w).abs().max() < 1e-12);
        assert!(aff.matrix.view((0, 2), (2, 2)).abs().max() < 1e-12);
        assert!((aff.displacement.rows(0, 2) - &b).abs().max() < 1e-12);
    }

    #[test]
    fn conv_layer_from_kernel_matches_generator() {
        let z = DMatrix::zeros(3, 3);
        let id = conv_layer_from_kernel(&z, &z, &z, &z, 1.0).unwrap();
        let aff = id.gaussian_affine().unwrap();
        assert!((aff.matrix - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-12);

        let hxx = circulant(&[0.6, 0.2, 0.2]);
        let hpp = circulant(&[0.4, -0.1, -0.1]);
        let hxp = circulant(&[0.1, 0.05, 0.05]);
        let hpx = hxp.transpose();
        let layer = conv_layer_from_kernel(&hxx, &hxp, &hpx, &hpp, 0.7).unwrap();
        let want = translation_invariant_symplectic(&hxx, &hxp, &hpx, &hpp, 0.7).unwrap();
        let got = layer.gaussian_affine().unwrap();
        assert!((&got.matrix - &want.matrix).abs().max() < 1e-7);
        assert!(toeplitz_blocks_check(&got.matrix));

        let mut bad = hxx.clone();
        bad[(0, 1)] += 0.1;
        bad[(1, 0)] += 0.1;
        assert!(matches!(
            conv_layer_from_kernel(&bad, &hxp, &hpx, &hpp, 0.7),
            Err(Error::NotTranslationInvariant { .. })
        ));
    }

    #[test]
    fn residual_block_examples() {
        let (d, r) = (40, 1.5);
        let sur = |x: f64| {
            let a = xeigen_amplitudes(x, r, d).unwrap();
            FockState::product_of(&[a, gates::coherent_amplitudes(c(0.0, 0.0), d)], d).unwrap()
        };
        let s = sur(0.7);
        // surrogate truncation at this cutoff costs a few 1e-4 in the means
        let out = residual_block(&s, &[]).unwrap();
        assert!((out.expect_x(1).unwrap() - 0.7).abs() < 1e-3);
        let out = residual_block(&sur(0.5), &[0.3]).unwrap();
        assert!((out.expect_x(1).unwrap() - 0.8).abs() < 1e-3);
        let out = residual_block(&sur(1.0), &[0.0, 0.0, 0.25]).unwrap();
        let var = (-2.0 * r).exp() / 2.0;
        assert!((out.expect_x(1).unwrap() - (1.0 + 0.25 * (1.0 + var))).abs() < 2e-3);
    }

    #[test]
    fn residual_wiring_adds_shortcut() {
        let d = 40;
        let mut l = LayerParams::identity(1);
        l.disp_re[0] = 0.3;
        let mut arch = Architecture::feedforward(vec![l], d);
        arch.wiring = Wiring::Residual;
        let input = arch.encode(&[c(0.4, 0.0)]).unwrap();
        let out = arch.forward(&input).unwrap();
        // carrier = x + F(x) with F(x) = x + 0.3
        assert!((out.expect_x(1).unwrap() - 1.1).abs() < 1e-5);
    }

    fn recurrent_arch(layer: LayerParams, io: usize, mem: usize) -> Architecture {
        let mut arch = Architecture::feedforward(vec![layer], 12);
        arch.wiring = Wiring::Recurrent { steps: 3, io_modes: io, memory_modes: mem };
        arch
    }

    #[test]
    fn recurrent_trivial_cases() {
        let arch = recurrent_arch(LayerParams::identity(2), 1, 1);
        assert!(matches!(recurrent_unroll(&arch, &[]), Err(Error::StepCountZero)));
        let xs = vec![vec![c(0.3, 0.0)], vec![c(-0.5, 0.1)], vec![c(0.2, 0.2)]];
        let outs = recurrent_unroll(&arch, &xs).unwrap();
        for (o, x) in outs.iter().zip(&xs) {
            assert!((o.expect_x(0).unwrap() - x[0].re).abs() < 1e-8);
            assert!((o.expect_p(0).unwrap() - x[0].im).abs() < 1e-8);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut l = LayerParams::random(2, 0.1, &mut rng);
        l.kerr = vec![0.0; 2];
        let arch = recurrent_arch(l.clone(), 1, 1);
        let one = recurrent_unroll(&arch, &xs[..1]).unwrap();
        let mut s = FockState::vacuum(2, 12).unwrap();
        s.apply(&gate_matrix(&Gate::Displacement { alpha: xs[0][0] }, 12).unwrap(), &[0]).unwrap();
        let plain = layer_apply(&s, &l, Nonlinearity::Kerr).unwrap();
        assert!((one[0].inner(&plain).unwrap() - c(plain.trace, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn recurrent_matches_iterated_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut l = LayerParams::random(2, 0.1, &mut rng);
        l.kerr = vec![0.0; 2];
        let arch = recurrent_arch(l.clone(), 1, 1);
        let xs = vec![vec![c(0.3, 0.1)], vec![c(-0.2, 0.0)], vec![c(0.1, -0.3)]];
        let outs = recurrent_unroll(&arch, &xs).unwrap();
        let aff = l.gaussian_affine().unwrap();
        let mut z = DVector::zeros(4);
        for (o, x) in outs.iter().zip(&xs) {
            z[0] = x[0].re;
            z[2] = x[0].im;
            z = aff.apply(&z);
            let got = means(o);
            for (a, b) in got.iter().zip(z.iter()) {
                assert!((a - b).abs() < 1e-6, "{got:?} vs {z}");
            }
            z[0] = 0.0;
            z[2] = 0.0;
        }
    }

    #[test]
    fn width_schedule_adds_and_drops_modes() {
        let d = 8;
        let mut l2 = LayerParams::identity(2);
        l2.disp_re[1] = 0.5;
        let l1 = LayerParams::identity(1);
        let arch = Architecture::feedforward(vec![LayerParams::identity(1), l2, l1], d);
        let input = arch.encode(&[c(0.3, 0.0)]).unwrap();
        let mut cache = LayerCache::default();
        let mid = arch.layer_step(1, arch.layer_step(0, input.clone(), &mut cache).unwrap(), &mut cache).unwrap();
        assert_eq!(mid.n_modes, 2);
        assert!((mid.expect_x(1).unwrap() - 0.5).abs() < 1e-8);
        let out = arch.forward(&input).unwrap();
        assert_eq!(out.n_modes, 1);
        assert!((out.expect_x(0).unwrap() - 0.3).abs() < 1e-8);
    }

    #[test]
    fn cache_reuses_compiled_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = LayerParams::random(1, 0.1, &mut rng);
        let mut cache = LayerCache::default();
        let a = cache.get(&l, Nonlinearity::Kerr, 6).unwrap();
        let b = cache.get(&l, Nonlinearity::Kerr, 6).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        // fused single mode: one operator
        assert_eq!(a.ops.len(), 1);
    }

    #[test]
    fn convolutional_equivariance() {
        let hxx = circulant(&[0.5, 0.1, 0.0, 0.1]);
        let hpp = circulant(&[0.3, 0.0, 0.05, 0.0]);
        let z = DMatrix::zeros(4, 4);
        let layer = conv_layer_from_kernel(&hxx, &z, &z, &hpp, 0.4).unwrap();
        let aff = layer.gaussian_affine().unwrap();
        let shift = crate::symplectic::cyclic_shift(4);
        let mut big = DMatrix::zeros(8, 8);
        big.view_mut((0, 0), (4, 4)).copy_from(&shift);
        big.view_mut((4, 4), (4, 4)).copy_from(&shift);
        let zin = DVector::from_vec(vec![0.1, -0.3, 0.5, 0.2, 0.0, 0.4, -0.1, 0.3]);
        let lhs = aff.apply(&(&big * &zin));
        let rhs = &big * aff.apply(&zin);
        assert!((lhs - rhs).norm() < 1e-8);
        let shifted = compose(&SymplecticAffine::linear(big.clone()).unwrap(), &aff).unwrap();
        assert!(shifted.matrix.iter().all(|v| v.is_finite()));
    }
}
