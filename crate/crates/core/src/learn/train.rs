//! Deterministic, resumable training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{adam_step, effective_lr, sgd_step, NelderMead, OptimizerSpec, OptimizerState};
use super::{CostBreakdown, Model, Regularizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    /// Sampled with replacement each step; `None` uses the whole dataset.
    /// Nelder-Mead always uses the whole dataset so its simplex costs stay comparable.
    pub batch_size: Option<usize>,
    pub optimizer: OptimizerSpec,
    pub fd_step: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub cost: f64,
    pub loss: f64,
    pub penalty: f64,
    pub min_trace: f64,
    pub param_norm: f64,
}

impl StepMetrics {
    pub const CSV_HEADER: &'static str = "step,cost,loss,penalty,min_trace,param_norm";

    fn from(step: usize, c: &CostBreakdown, params: &[f64]) -> Self {
        Self {
            step,
            cost: c.cost,
            loss: c.loss,
            penalty: c.penalty,
            min_trace: c.min_trace,
            param_norm: params.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: usize,
    pub params: Vec<f64>,
    pub optimizer: OptimizerState,
    pub rng: ChaCha8Rng,
    pub history: Vec<StepMetrics>,
}

impl TrainState {
    pub fn new(params: Vec<f64>, cfg: &TrainConfig) -> Self {
        Self {
            step: 0,
            optimizer: cfg.optimizer.init(params.len()),
            params,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            history: Vec::new(),
        }
    }

    /// Runs until `self.step == until`. On a non-finite cost the state keeps the
    /// last good parameters and `DivergedCost` is returned.
    pub fn run<M: Model + ?Sized>(&mut self, model: &mut M, cfg: &TrainConfig, until: usize) -> Result<()> {
        let reg = model.loss_spec().regularizer;
        let active = model.active_mask();
        if active.len() != self.params.len() {
            return Err(Error::ParameterCountMismatch { expected: active.len(), got: self.params.len() });
        }
        let n_data = model.dataset_len();
        if n_data == 0 {
            return Err(Error::EmptyBatch);
        }
        let full: Vec<usize> = (0..n_data).collect();
        while self.step < until {
            if let OptimizerSpec::NelderMead { .. } = cfg.optimizer {
                let mut eval = |p: &[f64]| -> Result<CostBreakdown> {
                    let mut c = model.evaluate(p, &full)?;
                    c.regularization = reg.value(p, &active);
                    c.cost += c.regularization;
                    Ok(c)
                };
                let mut nm = match &self.optimizer {
                    OptimizerState::NelderMead(Some(nm)) => nm.clone(),
                    _ => NelderMead::new(&self.params, &cfg.optimizer, &mut eval)?,
                };
                let best = nm.best().clone();
                if !best.cost.cost.is_finite() {
                    return Err(Error::DivergedCost { step: self.step, cost: best.cost.cost, last_finite: self.params.clone() });
                }
                self.history.push(StepMetrics::from(self.step, &best.cost, &best.x));
                nm.iterate(&mut eval)?;
                self.params = nm.best().x.clone();
                self.optimizer = OptimizerState::NelderMead(Some(nm));
                self.step += 1;
                continue;
            }

            let batch: Vec<usize> = match cfg.batch_size {
                Some(b) => (0..b.max(1)).map(|_| self.rng.gen_range(0..n_data)).collect(),
                None => full.clone(),
            };
            let (mut c, mut g) = match model.value_and_grad(&self.params, &batch, cfg.fd_step) {
                Ok(v) => v,
                Err(Error::NonFiniteCost(v)) => {
                    return Err(Error::DivergedCost { step: self.step, cost: v, last_finite: self.params.clone() })
                }
                Err(e) => return Err(e),
            };
            c.regularization = reg.value(&self.params, &active);
            c.cost += c.regularization;
            if !c.cost.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::DivergedCost { step: self.step, cost: c.cost, last_finite: self.params.clone() });
            }
            self.history.push(StepMetrics::from(self.step, &c, &self.params));
            if let Regularizer::L2(lambda) = reg {
                for ((gj, p), a) in g.iter_mut().zip(&self.params).zip(&active) {
                    if *a {
                        *gj += 2.0 * lambda * p;
                    }
                }
            }
            let lr = effective_lr(&cfg.optimizer, &self.optimizer);
            let mut next = self.params.clone();
            match cfg.optimizer {
                OptimizerSpec::Sgd { .. } => sgd_step(&cfg.optimizer, &mut self.optimizer, &g, &mut next)?,
                OptimizerSpec::Adam { .. } => adam_step(&cfg.optimizer, &mut self.optimizer, &g, &mut next)?,
                OptimizerSpec::NelderMead { .. } => unreachable!(),
            }
            if let Regularizer::L1(lambda) = reg {
                // proximal soft threshold
                let thr = lr * lambda;
                for (p, a) in next.iter_mut().zip(&active) {
                    if *a {
                        *p = p.signum() * (p.abs() - thr).max(0.0);
                    }
                }
            }
            model.project(&mut next);
            self.params = next;
            self.step += 1;
        }
        model.set_params(&self.params)?;
        Ok(())
    }
}

/// Trains from the model's current parameters for `cfg.steps` steps.
pub fn train<M: Model + ?Sized>(model: &mut M, cfg: &TrainConfig) -> Result<TrainState> {
    let mut st = TrainState::new(model.params(), cfg);
    st.run(model, cfg, cfg.steps)?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{LossSpec, LossVariant};

    /// `Σ (θⱼ − tⱼ)²` over the batch's coordinates.
    struct Quadratic {
        target: Vec<f64>,
        params: Vec<f64>,
        spec: LossSpec,
    }

    impl Model for Quadratic {
        fn num_params(&self) -> usize {
            self.params.len()
        }
        fn params(&self) -> Vec<f64> {
            self.params.clone()
        }
        fn active_mask(&self) -> Vec<bool> {
            vec![true; self.params.len()]
        }
        fn dataset_len(&self) -> usize {
            self.target.len()
        }
        fn loss_spec(&self) -> LossSpec {
            self.spec
        }
        fn evaluate(&mut self, p: &[f64], batch: &[usize]) -> Result<CostBreakdown> {
            Ok(CostBreakdown::plain(batch.iter().map(|&i| (p[i] - self.target[i]).powi(2)).sum()))
        }
        fn set_params(&mut self, p: &[f64]) -> Result<()> {
            self.params = p.to_vec();
            Ok(())
        }
    }

    fn quad(spec: LossSpec) -> Quadratic {
        Quadratic { target: vec![1.0, -0.5, 0.0, 0.002], params: vec![0.0; 4], spec }
    }

    fn cfg(opt: OptimizerSpec, steps: usize) -> TrainConfig {
        TrainConfig { steps, batch_size: Some(3), optimizer: opt, fd_step: 1e-4, seed: 5 }
    }

    #[test]
    fn zero_steps_returns_initial() {
        let mut m = quad(LossSpec::new(LossVariant::HomodyneMse));
        let st = train(&mut m, &cfg(OptimizerSpec::adam(0.1), 0)).unwrap();
        assert_eq!(st.params, vec![0.0; 4]);
        assert!(st.history.is_empty());
    }

    #[test]
    fn deterministic_and_resumable() {
        let c = cfg(OptimizerSpec::adam(0.05), 40);
        let mut a = quad(LossSpec::new(LossVariant::HomodyneMse));
        let ra = train(&mut a, &c).unwrap();
        let mut b = quad(LossSpec::new(LossVariant::HomodyneMse));
        let rb = train(&mut b, &c).unwrap();
        assert_eq!(ra, rb);
        let mut m = quad(LossSpec::new(LossVariant::HomodyneMse));
        let mut st = TrainState::new(m.params(), &c);
        st.run(&mut m, &c, 17).unwrap();
        let json = serde_json::to_string(&st).unwrap();
        let mut back: TrainState = serde_json::from_str(&json).unwrap();
        back.run(&mut m, &c, 40).unwrap();
        assert_eq!(back, ra);
    }

    #[test]
    fn optimizers_converge() {
        for opt in [OptimizerSpec::adam(0.05), OptimizerSpec::sgd(0.2, 0.0), OptimizerSpec::nelder_mead(0.3)] {
            let mut m = quad(LossSpec::new(LossVariant::HomodyneMse));
            let mut c = cfg(opt, 400);
            c.batch_size = None;
            let st = train(&mut m, &c).unwrap();
            assert!((st.params[0] - 1.0).abs() < 1e-2, "{opt:?}: {:?}", st.params);
        }
    }

    #[test]
    fn l1_zeroes_small_targets_l2_shrinks() {
        let mut spec = LossSpec::new(LossVariant::HomodyneMse);
        spec.regularizer = Regularizer::L1(0.05);
        let mut m = quad(spec);
        let mut c = cfg(OptimizerSpec::sgd(0.1, 0.0), 300);
        c.batch_size = None;
        let st = train(&mut m, &c).unwrap();
        assert_eq!(st.params[2], 0.0);
        assert_eq!(st.params[3], 0.0);
        spec.regularizer = Regularizer::L2(0.05);
        let mut m = quad(spec);
        let st = train(&mut m, &c).unwrap();
        assert!(st.params[3] != 0.0);
        assert!((st.params[0] - 1.0 / 1.05).abs() < 1e-3);
    }

    struct Exploding;
    impl Model for Exploding {
        fn num_params(&self) -> usize {
            1
        }
        fn params(&self) -> Vec<f64> {
            vec![0.0]
        }
        fn active_mask(&self) -> Vec<bool> {
            vec![false]
        }
        fn dataset_len(&self) -> usize {
            1
        }
        fn loss_spec(&self) -> LossSpec {
            LossSpec::new(LossVariant::HomodyneMse)
        }
        fn evaluate(&mut self, p: &[f64], _: &[usize]) -> Result<CostBreakdown> {
            Ok(CostBreakdown::plain(if p[0] < -0.25 { f64::INFINITY } else { -p[0] }))
        }
        fn set_params(&mut self, _: &[f64]) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = Exploding;
        let c = TrainConfig { steps: 10, batch_size: None, optimizer: OptimizerSpec::sgd(-0.1, 0.0), fd_step: 1e-4, seed: 0 };
        let mut st = TrainState::new(vec![0.0], &c);
        let err = st.run(&mut m, &c, 10).unwrap_err();
        assert!(matches!(err, Error::DivergedCost { .. }), "{err:?}");
        assert!(st.params[0] >= -0.25 - 0.1);
    }
}
