//! SGD with inverse decay, Adam, and Nelder-Mead.

use serde::{Deserialize, Serialize};

use super::CostBreakdown;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerSpec {
    /// `lr_t = lr / (1 + decay·t)`.
    Sgd { lr: f64, decay: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    /// Initial simplex `θ₀, θ₀ + step·eⱼ`; reflection, expansion, contraction, shrink.
    NelderMead { step: f64, alpha: f64, gamma: f64, rho: f64, sigma: f64 },
}

impl OptimizerSpec {
    pub fn sgd(lr: f64, decay: f64) -> Self {
        OptimizerSpec::Sgd { lr, decay }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerSpec::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn nelder_mead(step: f64) -> Self {
        OptimizerSpec::NelderMead { step, alpha: 1.0, gamma: 2.0, rho: 0.5, sigma: 0.5 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Sgd { .. } => "sgd",
            OptimizerSpec::Adam { .. } => "adam",
            OptimizerSpec::NelderMead { .. } => "nelder-mead",
        }
    }

    pub fn init(&self, dim: usize) -> OptimizerState {
        match *self {
            OptimizerSpec::Sgd { .. } => OptimizerState::Sgd { t: 0 },
            OptimizerSpec::Adam { .. } => OptimizerState::Adam { m: vec![0.0; dim], v: vec![0.0; dim], t: 0 },
            OptimizerSpec::NelderMead { .. } => OptimizerState::NelderMead(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerState {
    Sgd { t: u64 },
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
    NelderMead(Option<NelderMead>),
}

/// Learning rate used by a gradient step (for proximal terms).
pub fn effective_lr(spec: &OptimizerSpec, state: &OptimizerState) -> f64 {
    match (spec, state) {
        (OptimizerSpec::Sgd { lr, decay }, OptimizerState::Sgd { t }) => lr / (1.0 + decay * *t as f64),
        (OptimizerSpec::Adam { lr, .. }, _) => *lr,
        _ => 0.0,
    }
}

/// `θ ← θ − lr_t g`, `lr_t = lr / (1 + decay·t)`.
pub fn sgd_step(spec: &OptimizerSpec, state: &mut OptimizerState, grad: &[f64], theta: &mut [f64]) -> Result<()> {
    let lr_t = effective_lr(spec, state);
    let OptimizerState::Sgd { t } = state else {
        return Err(Error::InvalidArgument("optimizer state is not SGD".into()));
    };
    if grad.len() != theta.len() {
        return Err(Error::DimensionMismatch(format!("gradient {} vs parameters {}", grad.len(), theta.len())));
    }
    for (x, g) in theta.iter_mut().zip(grad) {
        *x -= lr_t * g;
    }
    *t += 1;
    Ok(())
}

/// Bias-corrected Adam update.
pub fn adam_step(spec: &OptimizerSpec, state: &mut OptimizerState, grad: &[f64], theta: &mut [f64]) -> Result<()> {
    let (&OptimizerSpec::Adam { lr, beta1, beta2, eps }, OptimizerState::Adam { m, v, t }) = (spec, state) else {
        return Err(Error::InvalidArgument("optimizer state is not Adam".into()));
    };
    if grad.len() != theta.len() || m.len() != theta.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient {}, moments {}, parameters {}",
            grad.len(),
            m.len(),
            theta.len()
        )));
    }
    *t += 1;
    let bc1 = 1.0 - beta1.powi(*t as i32);
    let bc2 = 1.0 - beta2.powi(*t as i32);
    for j in 0..theta.len() {
        m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
        v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
        let mh = m[j] / bc1;
        let vh = v[j] / bc2;
        theta[j] -= lr * mh / (vh.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub x: Vec<f64>,
    pub cost: CostBreakdown,
    /// Insertion order, used to break ties.
    pub id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    pub simplex: Vec<Vertex>,
    pub next_id: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl NelderMead {
    pub fn new(
        theta: &[f64],
        spec: &OptimizerSpec,
        mut cost: impl FnMut(&[f64]) -> Result<CostBreakdown>,
    ) -> Result<Self> {
        let &OptimizerSpec::NelderMead { step, alpha, gamma, rho, sigma } = spec else {
            return Err(Error::InvalidArgument("not a Nelder-Mead spec".into()));
        };
        let mut simplex = Vec::with_capacity(theta.len() + 1);
        simplex.push(Vertex { x: theta.to_vec(), cost: cost(theta)?, id: 0 });
        for j in 0..theta.len() {
            let mut x = theta.to_vec();
            x[j] += step;
            let c = cost(&x)?;
            simplex.push(Vertex { x, cost: c, id: j as u64 + 1 });
        }
        let mut nm = Self { simplex, next_id: theta.len() as u64 + 1, alpha, gamma, rho, sigma };
        nm.order();
        Ok(nm)
    }

    fn order(&mut self) {
        self.simplex.sort_by(|a, b| a.cost.cost.total_cmp(&b.cost.cost).then(a.id.cmp(&b.id)));
    }

    pub fn best(&self) -> &Vertex {
        &self.simplex[0]
    }

    fn vertex(&mut self, x: Vec<f64>, cost: CostBreakdown) -> Vertex {
        let id = self.next_id;
        self.next_id += 1;
        Vertex { x, cost, id }
    }

    /// One reflection/expansion/contraction/shrink iteration.
    pub fn iterate(&mut self, mut cost: impl FnMut(&[f64]) -> Result<CostBreakdown>) -> Result<()> {
        let n = self.simplex.len() - 1;
        let dim = self.simplex[0].x.len();
        let mut centroid = vec![0.0; dim];
        for v in &self.simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / n as f64;
            }
        }
        let along = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, x)| c + coef * (x - c)).collect()
        };
        let worst = self.simplex[n].clone();
        let f_best = self.simplex[0].cost.cost;
        let f_second = self.simplex[n - 1].cost.cost;
        let xr = along(&worst.x, -self.alpha);
        let fr = cost(&xr)?;
        if fr.cost < f_best {
            let xe = along(&worst.x, -self.alpha * self.gamma);
            let fe = cost(&xe)?;
            self.simplex[n] = if fe.cost < fr.cost { self.vertex(xe, fe) } else { self.vertex(xr, fr) };
        } else if fr.cost < f_second {
            self.simplex[n] = self.vertex(xr, fr);
        } else {
            let (xc, fc, accept) = if fr.cost < worst.cost.cost {
                let xc = along(&xr, self.rho);
                let fc = cost(&xc)?;
                let ok = fc.cost <= fr.cost;
                (xc, fc, ok)
            } else {
                let xc = along(&worst.x, self.rho);
                let fc = cost(&xc)?;
                let ok = fc.cost < worst.cost.cost;
                (xc, fc, ok)
            };
            if accept {
                self.simplex[n] = self.vertex(xc, fc);
            } else {
                let best = self.simplex[0].x.clone();
                for i in 1..=n {
                    let x: Vec<f64> =
                        best.iter().zip(&self.simplex[i].x).map(|(b, x)| b + self.sigma * (x - b)).collect();
                    let c = cost(&x)?;
                    self.simplex[i] = self.vertex(x, c);
                }
            }
        }
        self.order();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let spec = OptimizerSpec::adam(0.1);
        let mut st = spec.init(3);
        let mut th = vec![0.5, -1.0, 2.0];
        adam_step(&spec, &mut st, &[0.0; 3], &mut th).unwrap();
        assert_eq!(th, vec![0.5, -1.0, 2.0]);
        let spec = OptimizerSpec::sgd(0.1, 0.25);
        let mut st = spec.init(3);
        sgd_step(&spec, &mut st, &[0.0; 3], &mut th).unwrap();
        assert_eq!(th, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn adam_first_step_closed_form() {
        // bias-corrected first step: m̂ = g, v̂ = g², update lr·g/(|g| + ε)
        let spec = OptimizerSpec::adam(0.01);
        let mut st = spec.init(2);
        let g = [0.3, -2.0];
        let mut th = vec![1.0, 1.0];
        adam_step(&spec, &mut st, &g, &mut th).unwrap();
        for (t, gj) in th.iter().zip(g) {
            let want = 1.0 - 0.01 * gj / (gj.abs() + 1e-8);
            assert!((t - want).abs() < 1e-15);
        }
        let mut short = vec![0.0];
        assert!(matches!(adam_step(&spec, &mut st, &[1.0], &mut short), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sgd_inverse_decay() {
        let spec = OptimizerSpec::sgd(0.1, 0.25);
        let mut st = spec.init(1);
        let mut th = vec![0.0];
        sgd_step(&spec, &mut st, &[1.0], &mut th).unwrap();
        sgd_step(&spec, &mut st, &[1.0], &mut th).unwrap();
        assert!((th[0] + 0.1 + 0.1 / 1.25).abs() < 1e-15);
    }

    #[test]
    fn nelder_mead_monotone_on_quadratic() {
        let f = |x: &[f64]| Ok(CostBreakdown::plain(x.iter().map(|v| v * v).sum()));
        let spec = OptimizerSpec::nelder_mead(0.5);
        let mut nm = NelderMead::new(&[1.0, -2.0], &spec, f).unwrap();
        assert_eq!(nm.simplex.len(), 3);
        let mut last = nm.best().cost.cost;
        for _ in 0..200 {
            nm.iterate(f).unwrap();
            let b = nm.best().cost.cost;
            assert!(b <= last);
            last = b;
        }
        assert!(last < 1e-10, "{last}");
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| Ok(CostBreakdown::plain((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)));
        let mut nm = NelderMead::new(&[-1.2, 1.0], &OptimizerSpec::nelder_mead(0.5), f).unwrap();
        for _ in 0..2000 {
            nm.iterate(f).unwrap();
        }
        assert!((nm.best().x[0] - 1.0).abs() < 1e-4 && (nm.best().x[1] - 1.0).abs() < 1e-4);
    }
}
