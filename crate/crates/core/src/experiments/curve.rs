//! One-mode curve fitting: the fit itself, depth and loss sweeps, optimizer and
//! penalty comparisons.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::checkpoint::Session;
use super::config::ExperimentConfig;
use super::data::{curve_data, CurveData};
use super::plotdata::{write_csv, write_json};
use crate::error::Result;
use crate::learn::{
    InputSource, LossSpec, LossVariant, Model, OptimizerSpec, QnnModel, Regularizer, Targets, TrainConfig, TrainState, FD_STEP,
};
use crate::network::{Architecture, LayerParams};
use crate::C64;

/// Data plus the RNG state used for every model initialization.
pub struct CurveTask {
    pub train: CurveData,
    pub test: CurveData,
    init_rng: ChaCha8Rng,
}

impl CurveTask {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (train, test) = curve_data(cfg.target, cfg.noise, cfg.n_train, cfg.n_test, &mut rng);
        Self { train, test, init_rng: rng }
    }

    /// Randomly initialised model with `layers` layers and per-layer loss `eta`.
    /// Every call starts from the same initialization stream.
    pub fn model(&self, cfg: &ExperimentConfig, layers: usize, eta: f64, loss: LossSpec) -> Result<QnnModel> {
        let mut rng = self.init_rng.clone();
        let ls = (0..layers).map(|_| LayerParams::random(1, cfg.init_std, &mut rng)).collect();
        let mut arch = Architecture::feedforward(ls, cfg.cutoff);
        arch.layer_loss = eta;
        let inputs = InputSource::Encoded(self.train.x.iter().map(|&x| vec![C64::new(x, 0.0)]).collect());
        QnnModel::new(arch, inputs, Targets::Homodyne { mode: 0, values: self.train.noisy.clone() }, loss)
    }
}

pub fn loss_spec(cfg: &ExperimentConfig) -> LossSpec {
    LossSpec { variant: LossVariant::HomodyneMse, gamma: cfg.gamma, regularizer: cfg.regularizer_spec() }
}

pub fn train_config(cfg: &ExperimentConfig, optimizer: OptimizerSpec) -> TrainConfig {
    TrainConfig { steps: cfg.steps, batch_size: cfg.batch(), optimizer, fd_step: FD_STEP, seed: cfg.seed }
}

pub fn qnn_snapshot(m: &QnnModel) -> Value {
    let net = match &m.inputs {
        InputSource::Hybrid { net, .. } => serde_json::to_value(net).unwrap_or(Value::Null),
        _ => Value::Null,
    };
    serde_json::json!({ "architecture": m.arch, "classical": net, "params": m.params() })
}

/// `⟨x̂⟩` predictions of a trained model and the minimum output trace.
pub fn predict(model: &QnnModel, params: &[f64], xs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (_, arch) = model.instantiate(params)?;
    let mut min_trace = f64::INFINITY;
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let s = arch.forward(&arch.encode(&[C64::new(x, 0.0)])?)?;
        min_trace = min_trace.min(s.trace);
        out.push(s.expect_x(0)?);
    }
    Ok((out, min_trace))
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub layers: usize,
    pub eta: f64,
    /// Against the noisy training labels.
    pub train_mse: f64,
    /// Against the noiseless function on the test inputs.
    pub test_mse: f64,
    /// Against the noisy test labels.
    pub test_mse_noisy: f64,
    pub final_cost: f64,
    /// Smallest output trace over the test inputs.
    pub min_trace: f64,
}

fn summarize(task: &CurveTask, model: &QnnModel, st: &TrainState, layers: usize, eta: f64) -> Result<FitSummary> {
    let (train_pred, _) = predict(model, &st.params, &task.train.x)?;
    let (test_pred, min_trace) = predict(model, &st.params, &task.test.x)?;
    Ok(FitSummary {
        layers,
        eta,
        train_mse: mse(&train_pred, &task.train.noisy),
        test_mse: mse(&test_pred, &task.test.truth),
        test_mse_noisy: mse(&test_pred, &task.test.noisy),
        final_cost: st.history.last().map_or(f64::NAN, |h| h.cost),
        min_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvefitReport {
    pub target: String,
    pub noise: f64,
    pub cutoff: usize,
    pub steps: usize,
    pub fit: FitSummary,
    pub depth_sweep: Vec<FitSummary>,
}

pub fn run_curvefit(session: &mut Session) -> Result<CurvefitReport> {
    let cfg = session.config.clone();
    let task = CurveTask::new(&cfg);
    let tc = train_config(&cfg, cfg.optimizer_spec());
    let mut model = task.model(&cfg, cfg.layers, cfg.eta, loss_spec(&cfg))?;
    let st = session.train("curvefit", &mut model, &tc, qnn_snapshot)?;
    let fit = summarize(&task, &model, &st, cfg.layers, cfg.eta)?;
    if session.persist {
        let out = session.out().to_path_buf();
        let (train_pred, _) = predict(&model, &st.params, &task.train.x)?;
        let (test_pred, _) = predict(&model, &st.params, &task.test.x)?;
        let mut rows = Vec::new();
        for (split, d, p) in [("train", &task.train, &train_pred), ("test", &task.test, &test_pred)] {
            for i in 0..d.len() {
                rows.push(vec![split.to_string(), d.x[i].to_string(), d.noisy[i].to_string(), d.truth[i].to_string(), p[i].to_string()]);
            }
        }
        write_csv(&out.join("curvefit_points.csv"), "split,x,y_noisy,y_true,prediction", &rows)?;
        let grid: Vec<f64> = (0..=100).map(|k| -1.0 + 0.02 * k as f64).collect();
        let (pred, _) = predict(&model, &st.params, &grid)?;
        let rows: Vec<Vec<f64>> = grid.iter().zip(&pred).map(|(&x, &p)| vec![x, cfg.target.eval(x), p]).collect();
        write_csv(&out.join("curvefit_curve.csv"), "x,y_true,prediction", &rows)?;
    }
    let mut depth_sweep = Vec::new();
    for &d in &cfg.depths {
        let mut m = task.model(&cfg, d, cfg.eta, loss_spec(&cfg))?;
        let st = session.train(&format!("depth_{d}"), &mut m, &tc, qnn_snapshot)?;
        depth_sweep.push(summarize(&task, &m, &st, d, cfg.eta)?);
    }
    if session.persist && !depth_sweep.is_empty() {
        let rows: Vec<Vec<f64>> = depth_sweep.iter().map(|s| vec![s.layers as f64, s.test_mse, s.train_mse, s.min_trace]).collect();
        write_csv(&session.out().join("depth_sweep.csv"), "layers,test_mse,train_mse,min_trace", &rows)?;
    }
    let report = CurvefitReport {
        target: cfg.target.name().into(),
        noise: cfg.noise,
        cutoff: cfg.cutoff,
        steps: cfg.steps,
        fit,
        depth_sweep,
    };
    if session.persist {
        write_json(&session.out().join("summary.json"), &report)?;
    }
    Ok(report)
}

/// Fraction of photons lost after `layers` layers each transmitting `1 - eta`.
pub fn total_loss(eta: f64, layers: usize) -> f64 {
    1.0 - (1.0 - eta).powi(layers as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub eta: f64,
    pub total_loss: f64,
    pub fit: FitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSweepReport {
    pub layers: usize,
    pub lossless: FitSummary,
    pub points: Vec<LossPoint>,
}

pub fn run_loss_sweep(session: &mut Session) -> Result<LossSweepReport> {
    let cfg = session.config.clone();
    let task = CurveTask::new(&cfg);
    let tc = train_config(&cfg, cfg.optimizer_spec());
    let mut etas = cfg.eta_grid.clone();
    if !etas.contains(&0.0) {
        etas.insert(0, 0.0);
    }
    let mut points = Vec::new();
    for &eta in &etas {
        let mut m = task.model(&cfg, cfg.layers, eta, loss_spec(&cfg))?;
        let st = session.train(&format!("eta_{eta}"), &mut m, &tc, qnn_snapshot)?;
        points.push(LossPoint { eta, total_loss: total_loss(eta, cfg.layers), fit: summarize(&task, &m, &st, cfg.layers, eta)? });
    }
    let lossless = points.iter().find(|p| p.eta == 0.0).map(|p| p.fit.clone()).expect("eta = 0 is always run");
    let report = LossSweepReport { layers: cfg.layers, lossless, points };
    if session.persist {
        let rows: Vec<Vec<f64>> =
            report.points.iter().map(|p| vec![p.eta, p.total_loss, p.fit.test_mse, p.fit.train_mse, p.fit.min_trace]).collect();
        write_csv(&session.out().join("loss_sweep.csv"), "eta,total_loss,test_mse,train_mse,min_trace", &rows)?;
        write_json(&session.out().join("summary.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRun {
    pub optimizer: String,
    /// Human-readable note on what the run stands for.
    pub label: String,
    pub final_cost: f64,
    pub best_cost: f64,
    /// Best cost never increased between steps (meaningful for Nelder-Mead).
    pub monotone: bool,
    pub fit: FitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub runs: Vec<OptimizerRun>,
}

pub fn run_optimizer_comparison(session: &mut Session) -> Result<OptimizerReport> {
    let cfg = session.config.clone();
    let task = CurveTask::new(&cfg);
    let specs = [
        (OptimizerSpec::sgd(cfg.lr, cfg.decay), "numerical SGD (finite differences; without autodiff the autodiff SGD curve is the same run)"),
        (OptimizerSpec::adam(cfg.lr), "Adam (finite-difference gradients)"),
        (OptimizerSpec::nelder_mead(cfg.nm_step), "Nelder-Mead (gradient free, full training set)"),
    ];
    let mut runs = Vec::new();
    for (spec, label) in specs {
        let mut m = task.model(&cfg, cfg.layers, cfg.eta, loss_spec(&cfg))?;
        let st = session.train(spec.name(), &mut m, &train_config(&cfg, spec), qnn_snapshot)?;
        let costs: Vec<f64> = st.history.iter().map(|h| h.cost).collect();
        let full: Vec<usize> = (0..task.train.len()).collect();
        let final_cost = m.evaluate(&st.params, &full)?.cost + loss_spec(&cfg).regularizer.value(&st.params, &m.active_mask());
        runs.push(OptimizerRun {
            optimizer: spec.name().into(),
            label: label.into(),
            final_cost,
            best_cost: costs.iter().cloned().fold(f64::INFINITY, f64::min),
            monotone: costs.windows(2).all(|w| w[1] <= w[0]),
            fit: summarize(&task, &m, &st, cfg.layers, cfg.eta)?,
        });
    }
    let report = OptimizerReport { runs };
    if session.persist {
        write_json(&session.out().join("summary.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRun {
    pub name: String,
    pub final_loss: f64,
    pub final_trace: f64,
    /// Smallest trace seen during training.
    pub min_trace_seen: f64,
    /// Active parameters with magnitude below 1e-3, as a fraction.
    pub small_active_fraction: f64,
    pub active_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub runs: Vec<PenaltyRun>,
}

impl PenaltyReport {
    pub fn get(&self, name: &str) -> Option<&PenaltyRun> {
        self.runs.iter().find(|r| r.name == name)
    }
}

pub fn run_penalty_comparison(session: &mut Session) -> Result<PenaltyReport> {
    let cfg = session.config.clone();
    let task = CurveTask::new(&cfg);
    let base = LossSpec::new(LossVariant::HomodyneMse);
    let variants = [
        ("none", base),
        ("l2", LossSpec { regularizer: Regularizer::L2(cfg.reg_strength), ..base }),
        ("l1", LossSpec { regularizer: Regularizer::L1(cfg.reg_strength), ..base }),
        ("trace", LossSpec { gamma: cfg.gamma, ..base }),
    ];
    let tc = train_config(&cfg, cfg.optimizer_spec());
    let full: Vec<usize> = (0..task.train.len()).collect();
    let mut runs = Vec::new();
    for (name, spec) in variants {
        let mut m = task.model(&cfg, cfg.layers, cfg.eta, spec)?;
        let st = session.train(&format!("penalty_{name}"), &mut m, &tc, qnn_snapshot)?;
        let end = m.evaluate(&st.params, &full)?;
        let active: Vec<f64> =
            st.params.iter().zip(m.active_mask()).filter(|(_, a)| *a).map(|(v, _)| *v).collect();
        let small = active.iter().filter(|v| v.abs() < 1e-3).count() as f64 / active.len().max(1) as f64;
        runs.push(PenaltyRun {
            name: name.into(),
            final_loss: end.loss,
            final_trace: end.min_trace,
            min_trace_seen: st.history.iter().map(|h| h.min_trace).fold(end.min_trace, f64::min),
            small_active_fraction: small,
            active_params: active,
        });
    }
    let report = PenaltyReport { runs };
    if session.persist {
        let rows: Vec<Vec<String>> = report
            .runs
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.final_loss.to_string(),
                    r.final_trace.to_string(),
                    r.min_trace_seen.to_string(),
                    r.small_active_fraction.to_string(),
                ]
            })
            .collect();
        write_csv(&session.out().join("penalties.csv"), "run,final_loss,final_trace,min_trace_seen,small_active_fraction", &rows)?;
        write_json(&session.out().join("summary.json"), &report)?;
    }
    Ok(report)
}
