//! Costs, finite-difference gradients, optimizers and the training loop.

pub mod optim;
pub mod qnn;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;

pub use optim::{NelderMead, OptimizerSpec, OptimizerState};
pub use qnn::{clip_radius, InputSource, QnnModel, Targets};
pub use train::{train, StepMetrics, TrainConfig, TrainState};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossVariant {
    HomodyneMse,
    SinglePhotonClass,
    ImageFidelity,
    FockFidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Regularizer {
    #[default]
    None,
    L1(f64),
    L2(f64),
}

impl Regularizer {
    /// Value on the active entries of `params`.
    pub fn value(&self, params: &[f64], active: &[bool]) -> f64 {
        let it = params.iter().zip(active).filter(|(_, &a)| a).map(|(v, _)| *v);
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L1(l) => l * it.map(f64::abs).sum::<f64>(),
            Regularizer::L2(l) => l * it.map(|v| v * v).sum::<f64>(),
        }
    }
}

/// Loss variant, trace-penalty weight `γ` and regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub variant: LossVariant,
    pub gamma: f64,
    pub regularizer: Regularizer,
}

impl LossSpec {
    pub fn new(variant: LossVariant) -> Self {
        Self { variant, gamma: 0.0, regularizer: Regularizer::None }
    }
}

/// One evaluation of the cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `loss + γ·penalty + regularization`.
    pub cost: f64,
    pub loss: f64,
    pub penalty: f64,
    pub regularization: f64,
    pub min_trace: f64,
}

impl CostBreakdown {
    pub fn plain(cost: f64) -> Self {
        Self { cost, loss: cost, penalty: 0.0, regularization: 0.0, min_trace: 1.0 }
    }
}

/// `(1/N) Σ (fᵢ − yᵢ)²`.
pub fn loss_homodyne_mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions, {} targets", predictions.len(), targets.len())));
    }
    let n = predictions.len() as f64;
    Ok(predictions.iter().zip(targets).map(|(y, f)| (f - y) * (f - y)).sum::<f64>() / n)
}

/// `Σ (tᵢ² − 1)²` over state traces `tᵢ = ⟨ψᵢ|Π|ψᵢ⟩`.
pub fn penalty_trace(traces: &[f64]) -> f64 {
    traces.iter().map(|t| (t * t - 1.0) * (t * t - 1.0)).sum()
}

/// `Σ (1 − pᵢ)²` over raw single-photon probabilities.
pub fn loss_single_photon(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(probabilities.iter().map(|p| (1.0 - p) * (1.0 - p)).sum())
}

/// Fidelity of the box-projected, renormalised output with a target in the box.
pub fn projected_fidelity(output: &FockState, target: &FockState) -> Result<(f64, f64)> {
    let (psi, p) = output.project_box(target.cutoff)?;
    Ok((psi.fidelity(target)?, p))
}

/// `Σ (1 − |⟨ψᵢ|Aᵢ⟩|²)` over box-projected outputs `ψᵢ`.
pub fn loss_image(outputs: &[FockState], targets: &[FockState]) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = 0.0;
    for (o, t) in outputs.iter().zip(targets) {
        acc += 1.0 - projected_fidelity(o, t)?.0;
    }
    Ok(acc)
}

/// `Σ (|⟨i|ψᵢ⟩|² − 1)²` over box-projected outputs.
pub fn loss_fock_fidelity(outputs: &[FockState], targets: &[FockState]) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = 0.0;
    for (o, t) in outputs.iter().zip(targets) {
        let f = projected_fidelity(o, t)?.0;
        acc += (f - 1.0) * (f - 1.0);
    }
    Ok(acc)
}

/// Central differences `(C(θ + h eⱼ) − C(θ − h eⱼ)) / 2h`.
pub fn finite_diff_grad(mut cost: impl FnMut(&[f64]) -> Result<f64>, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
    }
    let mut x = theta.to_vec();
    let mut g = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        x[j] = theta[j] + h;
        let up = cost(&x)?;
        x[j] = theta[j] - h;
        let down = cost(&x)?;
        x[j] = theta[j];
        for v in [up, down] {
            if !v.is_finite() {
                return Err(Error::NonFiniteCost(v));
            }
        }
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// Something the training loop can optimise.
pub trait Model {
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    /// Mask of energy-raising parameters, the target of regularizers.
    fn active_mask(&self) -> Vec<bool>;
    fn dataset_len(&self) -> usize;
    fn loss_spec(&self) -> LossSpec;

    /// `loss + γ·penalty` on the batch; `regularization` is left to the trainer.
    fn evaluate(&mut self, params: &[f64], batch: &[usize]) -> Result<CostBreakdown>;

    /// Cost at `params` and its gradient.
    fn value_and_grad(&mut self, params: &[f64], batch: &[usize], h: f64) -> Result<(CostBreakdown, Vec<f64>)> {
        let base = self.evaluate(params, batch)?;
        let g = finite_diff_grad(|p| self.evaluate(p, batch).map(|c| c.cost), params, h)?;
        Ok((base, g))
    }

    /// Maps parameters back into the feasible region after an update.
    fn project(&self, _params: &mut [f64]) {}

    fn set_params(&mut self, params: &[f64]) -> Result<()>;
}
