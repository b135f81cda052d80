//! A quantum network (optionally driven by a classical encoder) as a trainable model.

use nalgebra::DVector;

use super::{CostBreakdown, LossSpec, LossVariant, Model};
use crate::classical::Mlp;
use crate::error::{Error, Result};
use crate::fock::{FockState, MIN_PROBABILITY};
use crate::linalg::C64;
use crate::network::{Architecture, CompiledCircuit};

/// Where each dataset item's input state comes from.
#[derive(Debug, Clone)]
pub enum InputSource {
    /// A fixed state per item.
    States(Vec<FockState>),
    /// Data run through the architecture's input encoding.
    Encoded(Vec<Vec<C64>>),
    /// A classical network maps features to the free parameters of the
    /// architecture's first layer, which acts on the vacuum. With `clip`, the
    /// network output vector is radially clipped to that norm.
    Hybrid { net: Mlp, features: Vec<Vec<f64>>, clip: Option<f64> },
}

impl InputSource {
    pub fn len(&self) -> usize {
        match self {
            InputSource::States(s) => s.len(),
            InputSource::Encoded(d) => d.len(),
            InputSource::Hybrid { features, .. } => features.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub enum Targets {
    /// `⟨x̂⟩` on `mode` should equal `values[i]`.
    Homodyne { mode: usize, values: Vec<f64> },
    /// One photon should appear in mode `labels[i]` (two modes).
    SinglePhoton { labels: Vec<usize> },
    /// Box-projected outputs should match these states (box size = target cutoff).
    States(Vec<FockState>),
}

#[derive(Debug, Clone)]
pub struct QnnModel {
    pub arch: Architecture,
    pub inputs: InputSource,
    pub targets: Targets,
    pub loss: LossSpec,
}

/// Radially clips `v` to norm `r`.
pub fn clip_radius(v: &mut [f64], r: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > r {
        v.iter_mut().for_each(|x| *x *= r / n);
    }
}

impl QnnModel {
    pub fn new(arch: Architecture, inputs: InputSource, targets: Targets, loss: LossSpec) -> Result<Self> {
        let n = inputs.len();
        let nt = match &targets {
            Targets::Homodyne { values, .. } => values.len(),
            Targets::SinglePhoton { labels } => labels.len(),
            Targets::States(s) => s.len(),
        };
        if n != nt {
            return Err(Error::DimensionMismatch(format!("{n} inputs, {nt} targets")));
        }
        if arch.layers.is_empty() {
            return Err(Error::InvalidArgument("architecture has no layers".into()));
        }
        let m = Self { arch, inputs, targets, loss };
        if let InputSource::Hybrid { net, .. } = &m.inputs {
            let need = m.arch.layers[0].num_params();
            if net.output_dim() != need {
                return Err(Error::ParameterCountMismatch { expected: need, got: net.output_dim() });
            }
        }
        Ok(m)
    }

    fn hybrid_net(&self) -> Option<&Mlp> {
        match &self.inputs {
            InputSource::Hybrid { net, .. } => Some(net),
            _ => None,
        }
    }

    /// Index of the first trainable quantum layer.
    pub fn first_layer(&self) -> usize {
        usize::from(self.hybrid_net().is_some())
    }

    pub fn n_classical(&self) -> usize {
        self.hybrid_net().map_or(0, |n| n.num_params())
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = self.n_classical();
        self.arch.layers[self.first_layer()..]
            .iter()
            .map(|l| {
                let r = (off, l.num_params());
                off += r.1;
                r
            })
            .collect()
    }

    /// Network and architecture carrying the flat parameter vector.
    pub fn instantiate(&self, p: &[f64]) -> Result<(Option<Mlp>, Architecture)> {
        if p.len() != self.num_params() {
            return Err(Error::ParameterCountMismatch { expected: self.num_params(), got: p.len() });
        }
        let nc = self.n_classical();
        let net = match self.hybrid_net() {
            Some(n) => {
                let mut n = n.clone();
                n.set_params(&p[..nc])?;
                Some(n)
            }
            None => None,
        };
        let mut arch = self.arch.clone();
        let q0 = self.first_layer();
        for (l, (off, len)) in self.layer_offsets().into_iter().enumerate() {
            arch.layers[q0 + l].set_params(&p[off..off + len])?;
        }
        Ok((net, arch))
    }

    /// Classical output for item `i`, after clipping.
    pub fn encoder_output(&self, net: &Mlp, i: usize) -> Result<Vec<f64>> {
        let InputSource::Hybrid { features, clip, .. } = &self.inputs else {
            return Err(Error::InvalidArgument("model has no classical encoder".into()));
        };
        let mut o = net.forward(&features[i])?.as_slice().to_vec();
        if let Some(r) = clip {
            clip_radius(&mut o, *r);
        }
        Ok(o)
    }

    /// State entering the first layer for a non-hybrid item.
    fn plain_entry(&self, arch: &Architecture, i: usize) -> Result<FockState> {
        match &self.inputs {
            InputSource::States(s) => arch.entry(s[i].clone()),
            InputSource::Encoded(d) => arch.entry(arch.encode(&d[i])?),
            InputSource::Hybrid { .. } => unreachable!(),
        }
    }

    /// Output of the controlled first layer acting on the vacuum.
    fn controlled_entry(&self, arch: &Architecture, control: &[f64]) -> Result<FockState> {
        let mut a = arch.clone();
        a.layers[0].set_params(control)?;
        let c = a.compile_layer(0)?;
        let vac = a.entry(FockState::vacuum(a.input_modes(), a.cutoff)?)?;
        a.layer_step_with(0, vac, &c)
    }

    /// State entering the first trainable layer.
    fn entry_state(&self, net: Option<&Mlp>, arch: &Architecture, i: usize) -> Result<FockState> {
        match net {
            Some(n) => self.controlled_entry(arch, &self.encoder_output(n, i)?),
            None => self.plain_entry(arch, i),
        }
    }

    fn run_from(&self, arch: &Architecture, compiled: &[CompiledCircuit], start: usize, mut s: FockState) -> Result<FockState> {
        let q0 = self.first_layer();
        for l in start..arch.layers.len() {
            s = arch.layer_step_with(l, s, &compiled[l - q0])?;
        }
        Ok(s)
    }

    fn compile_all(&self, arch: &Architecture) -> Result<Vec<CompiledCircuit>> {
        (self.first_layer()..arch.layers.len()).map(|l| arch.compile_layer(l)).collect()
    }

    /// Output states for the given items at parameters `p`.
    pub fn outputs(&self, p: &[f64], items: &[usize]) -> Result<Vec<FockState>> {
        let (net, arch) = self.instantiate(p)?;
        let compiled = self.compile_all(&arch)?;
        items
            .iter()
            .map(|&i| {
                let e = self.entry_state(net.as_ref(), &arch, i)?;
                self.run_from(&arch, &compiled, self.first_layer(), e)
            })
            .collect()
    }

    /// Loss contribution and trace of one output; `n` is the batch size.
    pub fn item_terms(&self, out: &FockState, i: usize, n: usize) -> Result<(f64, f64)> {
        let term = match (&self.targets, self.loss.variant) {
            (Targets::Homodyne { mode, values }, LossVariant::HomodyneMse) => {
                let y = out.expect_x(*mode)?;
                (values[i] - y).powi(2) / n as f64
            }
            (Targets::SinglePhoton { labels }, LossVariant::SinglePhotonClass) => {
                let mut pattern = vec![0; out.n_modes];
                pattern[labels[i]] = 1;
                (1.0 - out.photon_prob(&pattern)?).powi(2)
            }
            (Targets::States(t), LossVariant::ImageFidelity) => 1.0 - self.fidelity_or_zero(out, &t[i])?,
            (Targets::States(t), LossVariant::FockFidelity) => (self.fidelity_or_zero(out, &t[i])? - 1.0).powi(2),
            _ => return Err(Error::InvalidArgument("loss variant does not match targets".into())),
        };
        Ok((term, out.trace))
    }

    /// A vanished projection counts as zero fidelity so training can continue.
    fn fidelity_or_zero(&self, out: &FockState, target: &FockState) -> Result<f64> {
        match out.project_box(target.cutoff) {
            Ok((psi, _)) => psi.fidelity(target),
            Err(Error::ZeroProbability(p)) if p < MIN_PROBABILITY => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    fn aggregate(&self, terms: &[(f64, f64)]) -> CostBreakdown {
        let loss: f64 = terms.iter().map(|t| t.0).sum();
        let penalty: f64 = terms.iter().map(|t| (t.1 * t.1 - 1.0).powi(2)).sum();
        let min_trace = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        CostBreakdown { cost: loss + self.loss.gamma * penalty, loss, penalty, regularization: 0.0, min_trace }
    }

    fn item_cost(&self, out: &FockState, i: usize, n: usize) -> Result<f64> {
        let (t, tr) = self.item_terms(out, i, n)?;
        Ok(t + self.loss.gamma * (tr * tr - 1.0).powi(2))
    }
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteCost(v))
    }
}

impl Model for QnnModel {
    fn num_params(&self) -> usize {
        self.n_classical() + self.arch.layers[self.first_layer()..].iter().map(|l| l.num_params()).sum::<usize>()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.hybrid_net().map(|n| n.params()).unwrap_or_default();
        for l in &self.arch.layers[self.first_layer()..] {
            p.extend(l.params());
        }
        p
    }

    fn active_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_classical()];
        for l in &self.arch.layers[self.first_layer()..] {
            m.extend(l.param_kinds().into_iter().map(|k| k.is_active()));
        }
        m
    }

    fn dataset_len(&self) -> usize {
        self.inputs.len()
    }

    fn loss_spec(&self) -> LossSpec {
        self.loss
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let (net, arch) = self.instantiate(p)?;
        if let (Some(n), InputSource::Hybrid { net: slot, .. }) = (net, &mut self.inputs) {
            *slot = n;
        }
        self.arch = arch;
        Ok(())
    }

    fn evaluate(&mut self, p: &[f64], batch: &[usize]) -> Result<CostBreakdown> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let outs = self.outputs(p, batch)?;
        let terms = outs
            .iter()
            .zip(batch)
            .map(|(o, &i)| self.item_terms(o, i, batch.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.aggregate(&terms))
    }

    /// Central differences with the states entering each layer cached, so a
    /// perturbation in layer `l` only reruns layers `l..`. Classical encoder
    /// parameters use the chain rule through the encoder outputs, with both
    /// factors taken by central differences.
    fn value_and_grad(&mut self, p: &[f64], batch: &[usize], h: f64) -> Result<(CostBreakdown, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = batch.len();
        let (net, arch) = self.instantiate(p)?;
        let q0 = self.first_layer();
        let n_layers = arch.layers.len();
        let compiled = self.compile_all(&arch)?;
        // prefix[k][b]: state entering layer q0 + k for batch item b
        let mut prefix: Vec<Vec<FockState>> = vec![Vec::with_capacity(n); n_layers - q0 + 1];
        for &i in batch {
            let mut s = self.entry_state(net.as_ref(), &arch, i)?;
            for l in q0..n_layers {
                prefix[l - q0].push(s.clone());
                s = arch.layer_step_with(l, s, &compiled[l - q0])?;
            }
            prefix[n_layers - q0].push(s);
        }
        let terms = prefix[n_layers - q0]
            .iter()
            .zip(batch)
            .map(|(o, &i)| self.item_terms(o, i, n))
            .collect::<Result<Vec<_>>>()?;
        let base = self.aggregate(&terms);
        check_finite(base.cost)?;

        let mut grad = vec![0.0; p.len()];
        for (k, (off, len)) in self.layer_offsets().into_iter().enumerate() {
            let l = q0 + k;
            let local = arch.layers[l].params();
            for j in 0..len {
                let mut sides = [0.0; 2];
                for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let mut v = local.clone();
                    v[j] += sign * h;
                    let mut a = arch.clone();
                    a.layers[l].set_params(&v)?;
                    let c = a.compile_layer(l)?;
                    let mut acc = 0.0;
                    for (b, &i) in batch.iter().enumerate() {
                        let mut s = a.layer_step_with(l, prefix[k][b].clone(), &c)?;
                        for l2 in l + 1..n_layers {
                            s = a.layer_step_with(l2, s, &compiled[l2 - q0])?;
                        }
                        acc += self.item_cost(&s, i, n)?;
                    }
                    sides[side] = check_finite(acc)?;
                }
                grad[off + j] = (sides[0] - sides[1]) / (2.0 * h);
            }
        }

        if let (Some(net), InputSource::Hybrid { features, clip, .. }) = (net.as_ref(), &self.inputs) {
            let nc = self.n_classical();
            let theta = net.params();
            for &i in batch {
                let raw = net.forward(&features[i])?;
                let item = |o: &DVector<f64>| -> Result<f64> {
                    let mut o = o.as_slice().to_vec();
                    if let Some(r) = clip {
                        clip_radius(&mut o, *r);
                    }
                    let e = self.controlled_entry(&arch, &o)?;
                    let out = self.run_from(&arch, &compiled, q0, e)?;
                    check_finite(self.item_cost(&out, i, n)?)
                };
                let mut g_out = vec![0.0; raw.len()];
                for (k, g) in g_out.iter_mut().enumerate() {
                    let mut up = raw.clone();
                    up[k] += h;
                    let mut down = raw.clone();
                    down[k] -= h;
                    *g = (item(&up)? - item(&down)?) / (2.0 * h);
                }
                let mut trial = net.clone();
                let mut t = theta.clone();
                for j in 0..nc {
                    t[j] = theta[j] + h;
                    trial.set_params(&t)?;
                    let up = trial.forward(&features[i])?;
                    t[j] = theta[j] - h;
                    trial.set_params(&t)?;
                    let down = trial.forward(&features[i])?;
                    t[j] = theta[j];
                    let dj: f64 = (0..raw.len()).map(|k| g_out[k] * (up[k] - down[k])).sum();
                    grad[j] += dj / (2.0 * h);
                }
            }
        }
        Ok((base, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::Activation;
    use crate::learn::finite_diff_grad;
    use crate::network::{LayerMask, LayerParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn curve_model(layers: usize, seed: u64) -> QnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ls = (0..layers).map(|_| LayerParams::random(1, 0.1, &mut rng)).collect();
        let arch = Architecture::feedforward(ls, 10);
        let xs = [-0.8, -0.2, 0.3, 0.9];
        let mut spec = LossSpec::new(LossVariant::HomodyneMse);
        spec.gamma = 2.0;
        QnnModel::new(
            arch,
            InputSource::Encoded(xs.iter().map(|&x| vec![c(x)]).collect()),
            Targets::Homodyne { mode: 0, values: xs.iter().map(|x| (std::f64::consts::PI * x).sin()).collect() },
            spec,
        )
        .unwrap()
    }

    #[test]
    fn identity_model_reproduces_inputs() {
        let arch = Architecture::feedforward(vec![LayerParams::identity(1)], 20);
        let xs: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
        let mut m = QnnModel::new(
            arch,
            InputSource::Encoded(xs.iter().map(|&x| vec![c(x)]).collect()),
            Targets::Homodyne { mode: 0, values: xs.clone() },
            LossSpec::new(LossVariant::HomodyneMse),
        )
        .unwrap();
        let p = m.params();
        let all: Vec<usize> = (0..xs.len()).collect();
        assert!(m.evaluate(&p, &all).unwrap().loss <= 1e-6);
    }

    #[test]
    fn cached_gradient_matches_plain_fd() {
        let mut m = curve_model(3, 1);
        let p = m.params();
        let batch = [0, 2, 3, 2];
        let (base, g) = m.value_and_grad(&p, &batch, 1e-4).unwrap();
        assert_eq!(base, m.evaluate(&p, &batch).unwrap());
        let plain = finite_diff_grad(|q| m.evaluate(q, &batch).map(|c| c.cost), &p, 1e-4).unwrap();
        for (a, b) in g.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_matches_richardson_stencil() {
        let mut m = curve_model(2, 2);
        let p = m.params();
        let batch = [0, 1, 2, 3];
        let (_, g) = m.value_and_grad(&p, &batch, 1e-4).unwrap();
        let h = 1e-3;
        for j in 0..p.len() {
            let mut f = |d: f64| {
                let mut q = p.clone();
                q[j] += d;
                m.evaluate(&q, &batch).unwrap().cost
            };
            let rich = (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
            assert!((g[j] - rich).abs() < 1e-4, "param {j}: {} vs {rich}", g[j]);
        }
    }

    fn hybrid_model() -> QnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::glorot(&[3, 4, 2], Activation::Elu, Activation::Identity, &mut rng);
        let mut first = LayerParams::identity(1);
        first.mask = LayerMask { u1: false, squeeze: false, u2: false, displacement: true, nonlinear: false };
        let layers = vec![first, LayerParams::random(1, 0.1, &mut rng), LayerParams::random(1, 0.1, &mut rng)];
        let arch = Architecture::feedforward(layers, 8);
        let features = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let targets = (0..3).map(|k| FockState::fock(&[k], 3).unwrap()).collect();
        let mut spec = LossSpec::new(LossVariant::FockFidelity);
        spec.gamma = 10.0;
        QnnModel::new(arch, InputSource::Hybrid { net, features, clip: Some(1.5) }, Targets::States(targets), spec).unwrap()
    }

    #[test]
    fn hybrid_chain_rule_matches_plain_fd() {
        let mut m = hybrid_model();
        let p = m.params();
        assert_eq!(p.len(), m.n_classical() + 14);
        let batch = [0, 1, 2];
        let (_, g) = m.value_and_grad(&p, &batch, 1e-4).unwrap();
        let plain = finite_diff_grad(|q| m.evaluate(q, &batch).map(|c| c.cost), &p, 1e-4).unwrap();
        for (a, b) in g.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn single_photon_probability_on_untrained_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let arch = Architecture::feedforward(vec![LayerParams::random(2, 0.3, &mut rng)], 6);
        let vac = FockState::vacuum(2, 6).unwrap();
        let mut m = QnnModel::new(
            arch.clone(),
            InputSource::States(vec![vac.clone()]),
            Targets::SinglePhoton { labels: vec![1] },
            LossSpec::new(LossVariant::SinglePhotonClass),
        )
        .unwrap();
        let out = arch.forward(&vac).unwrap();
        let p01 = out.amplitudes().unwrap()[1].norm_sqr();
        let c = m.evaluate(&m.params(), &[0]).unwrap();
        assert!((c.loss - (1.0 - p01).powi(2)).abs() < 1e-14);
    }
}
