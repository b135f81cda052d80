//! Fully connected classical networks used as encoders for hybrid models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::network::{Architecture, LayerCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Elu,
    Identity,
}

/// `ELU(x) = x` for `x ≥ 0`, `eˣ − 1` otherwise.
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => elu(x),
            Activation::Identity => x,
        }
    }
}

/// Layers `y = act(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub activations: Vec<Activation>,
}

impl Mlp {
    pub fn from_layers(weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>, activations: Vec<Activation>) -> Result<Self> {
        if weights.len() != biases.len() || weights.len() != activations.len() || weights.is_empty() {
            return Err(Error::DimensionMismatch("layer lists differ in length".into()));
        }
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != b.len() {
                return Err(Error::DimensionMismatch(format!("layer {i}: {} rows, bias {}", w.nrows(), b.len())));
            }
            if i > 0 && weights[i - 1].nrows() != w.ncols() {
                return Err(Error::DimensionMismatch(format!("layer {i} expects {} inputs", w.ncols())));
            }
        }
        Ok(Self { weights, biases, activations })
    }

    /// Glorot-uniform weights, zero biases. `sizes` lists every width including input and output.
    pub fn glorot<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let k = sizes.len() - 1;
        let mut weights = Vec::with_capacity(k);
        let mut biases = Vec::with_capacity(k);
        let mut activations = Vec::with_capacity(k);
        for i in 0..k {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-limit..limit)));
            biases.push(DVector::zeros(fan_out));
            activations.push(if i + 1 == k { output } else { hidden });
        }
        Self { weights, biases, activations }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, |w| w.nrows())
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.weights.iter().map(|w| w.nrows())).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!("{} inputs for {} input units", x.len(), self.input_dim())));
        }
        let mut h = DVector::from_column_slice(x);
        for ((w, b), act) in self.weights.iter().zip(&self.biases).zip(&self.activations) {
            h = (w * h + b).map(|v| act.apply(v));
        }
        Ok(h)
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Per layer: weights in column-major order, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::ParameterCountMismatch { expected: self.num_params(), got: values.len() });
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&values[off..off + n]);
            off += n;
            let m = b.len();
            b.as_mut_slice().copy_from_slice(&values[off..off + m]);
            off += m;
        }
        Ok(())
    }
}

/// Classical outputs set the unmasked parameters of the architecture's first
/// layer, then the stack runs on the vacuum.
pub fn hybrid_forward(net: &Mlp, arch: &Architecture, x: &[f64]) -> Result<FockState> {
    let out = net.forward(x)?;
    let mut arch = arch.clone();
    let first = arch.layers.first_mut().ok_or_else(|| Error::InvalidArgument("architecture has no layers".into()))?;
    let need = first.num_params();
    if out.len() != need {
        return Err(Error::ParameterCountMismatch { expected: need, got: out.len() });
    }
    first.set_params(out.as_slice())?;
    let vac = FockState::vacuum(arch.input_modes(), arch.cutoff)?;
    arch.forward_from(0, vac, &mut LayerCache::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LayerMask, LayerParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_net_is_identity() {
        let net = Mlp::from_layers(vec![DMatrix::identity(3, 3)], vec![DVector::zeros(3)], vec![Activation::Identity]).unwrap();
        let y = net.forward(&[0.5, -1.0, 2.0]).unwrap();
        assert_eq!(y.as_slice(), &[0.5, -1.0, 2.0]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn elu_values_and_smoothness() {
        assert_eq!(elu(2.5), 2.5);
        assert_eq!(elu(0.0), 0.0);
        assert!((elu(-50.0) + 1.0).abs() < 1e-15);
        let h = 1e-6;
        assert!((elu(h) - elu(-h)).abs() < 3.0 * h);
        let left = (elu(0.0) - elu(-h)) / h;
        let right = (elu(h) - elu(0.0)) / h;
        assert!((left - right).abs() < 1e-5);
        assert!((left - 1.0).abs() < 1e-5);
    }

    #[test]
    fn fraud_encoder_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::glorot(&[10, 10, 10, 14], Activation::Elu, Activation::Identity, &mut rng);
        assert_eq!(net.sizes(), vec![10, 10, 10, 14]);
        assert_eq!(net.forward(&[0.1; 10]).unwrap().len(), 14);
        assert_eq!(net.num_params(), 110 + 110 + 154);
        let p = net.params();
        let mut other = Mlp::glorot(&[10, 10, 10, 14], Activation::Elu, Activation::Identity, &mut rng);
        other.set_params(&p).unwrap();
        assert_eq!(other, net);
    }

    fn masked_layer(n: usize, mask: LayerMask) -> LayerParams {
        let mut l = LayerParams::identity(n);
        l.mask = mask;
        l
    }

    #[test]
    fn zero_output_gives_identity_layer() {
        let net = Mlp::from_layers(vec![DMatrix::zeros(2, 3)], vec![DVector::zeros(2)], vec![Activation::Identity]).unwrap();
        let mask = LayerMask { u1: false, squeeze: false, u2: false, displacement: true, nonlinear: false };
        let arch = Architecture::feedforward(vec![masked_layer(1, mask)], 8);
        let out = hybrid_forward(&net, &arch, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, FockState::vacuum(1, 8).unwrap());
    }

    #[test]
    fn net_output_sets_displacement() {
        let w = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let net = Mlp::from_layers(vec![w], vec![DVector::zeros(2)], vec![Activation::Identity]).unwrap();
        let mask = LayerMask { u1: false, squeeze: false, u2: false, displacement: true, nonlinear: false };
        let arch = Architecture::feedforward(vec![masked_layer(1, mask)], 20);
        let out = hybrid_forward(&net, &arch, &[0.4, -0.3, 9.0]).unwrap();
        assert!((out.expect_x(0).unwrap() - 0.4).abs() < 1e-9);
        assert!((out.expect_p(0).unwrap() + 0.3).abs() < 1e-9);
    }

    #[test]
    fn fraud_input_layer_takes_fourteen() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::glorot(&[10, 10, 10, 14], Activation::Elu, Activation::Identity, &mut rng);
        let mut first = LayerParams::identity(2);
        first.mask.u1 = false;
        let arch = Architecture::feedforward(vec![first, LayerParams::identity(2)], 4);
        let out = hybrid_forward(&net, &arch, &[0.05; 10]).unwrap();
        assert_eq!(out.n_modes, 2);
        let bad = Mlp::glorot(&[10, 13], Activation::Elu, Activation::Identity, &mut rng);
        assert!(matches!(
            hybrid_forward(&bad, &arch, &[0.0; 10]),
            Err(Error::ParameterCountMismatch { expected: 14, got: 13 })
        ));
    }

    #[test]
    fn embedding_matches_identity_activation_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (d, r) = (40, 1.5);
        for _ in 0..3 {
            let w = loop {
                // contractions would anti-squeeze the surrogates' wide p quadrature past the cutoff
                let w = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
                let s = w.clone().svd(false, false).singular_values;
                if s.min() >= 1.0 && s.max() <= 2.0 {
                    break w;
                }
            };
            let b = DVector::from_fn(2, |_, _| rng.gen_range(-0.3..0.3));
            let x = [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)];
            let net = Mlp::from_layers(vec![w.clone()], vec![b.clone()], vec![Activation::Identity]).unwrap();
            let want = net.forward(&x).unwrap();
            let arch = crate::network::embed_classical(&w, &b, crate::network::Nonlinearity::Kerr, d).unwrap();
            let input = FockState::product_of(
                &[crate::fock::xeigen_amplitudes(x[0], r, d).unwrap(), crate::fock::xeigen_amplitudes(x[1], r, d).unwrap()],
                d,
            )
            .unwrap();
            let out = arch.forward(&input).unwrap();
            for m in 0..2 {
                assert!((out.expect_x(m).unwrap() - want[m]).abs() < 5e-3);
            }
        }
    }
}
