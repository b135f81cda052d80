//! Flat `key = value` experiment configuration with desk and paper presets.
//!
//! Lines are `key = value`; `#` starts a comment; list values are comma separated.
//! Unknown keys are rejected.
//!
//! | key | meaning |
//! |---|---|
//! | `seed` | RNG seed for data, initialization and batch sampling |
//! | `cutoff` | Fock cutoff `D` per mode |
//! | `layers` | number of trainable quantum layers |
//! | `steps` | optimizer steps (batches) |
//! | `batch_size` | items per step, sampled with replacement; `0` is the full set |
//! | `optimizer` | `sgd`, `adam` or `nelder-mead` |
//! | `lr`, `decay` | learning rate; SGD inverse decay |
//! | `nm_step` | initial Nelder-Mead simplex edge |
//! | `gamma` | trace penalty weight |
//! | `regularizer`, `reg_strength` | `none`, `l1` or `l2` on active parameters |
//! | `init_std` | std of initial squeeze, displacement and Kerr strengths |
//! | `target`, `noise`, `n_train`, `n_test` | curve task: `sin`, `cube` or `sinc`; label noise ε; split sizes |
//! | `eta` | photon loss per layer in curve fitting |
//! | `eta_grid` | loss values for the loss sweep, each in `[0, 0.3]` |
//! | `depths` | layer counts for the curve-fitting depth sweep |
//! | `data` | fraud CSV path (`Time,V1..V28,Amount,Class`); empty for synthetic |
//! | `n_samples`, `positive_rate`, `separation` | synthetic fraud generator |
//! | `undersample_ratio` | genuine records per fraud record in training |
//! | `threshold` | fraud decision threshold on the post-selected genuine probability |
//! | `image_size` | tetromino resolution, `2` or `4` |
//! | `alpha` | tetromino input coherent amplitude |
//! | `clip` | autoencoder displacement radius |
//! | `grid` | autoencoder phase-space grid points per axis |
//! | `modes` | modes for the decomposition demo |
//! | `checkpoint_every` | steps between checkpoints; `0` only after each run |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::data::Target;
use crate::error::{Error, Result};
use crate::learn::{OptimizerSpec, Regularizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    Curvefit,
    LossSweep,
    Optimizers,
    Penalties,
    Fraud,
    Tetromino,
    Autoencoder,
    Decompose,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Curvefit,
        Experiment::LossSweep,
        Experiment::Optimizers,
        Experiment::Penalties,
        Experiment::Fraud,
        Experiment::Tetromino,
        Experiment::Autoencoder,
        Experiment::Decompose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Curvefit => "curvefit",
            Experiment::LossSweep => "loss-sweep",
            Experiment::Optimizers => "optimizers",
            Experiment::Penalties => "penalties",
            Experiment::Fraud => "fraud",
            Experiment::Tetromino => "tetromino",
            Experiment::Autoencoder => "autoencoder",
            Experiment::Decompose => "decompose",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::Config(format!("unknown preset `{s}` (desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    NelderMead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    None,
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub seed: u64,
    pub cutoff: usize,
    pub layers: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub decay: f64,
    pub nm_step: f64,
    pub gamma: f64,
    pub regularizer: RegKind,
    pub reg_strength: f64,
    pub init_std: f64,
    pub target: Target,
    pub noise: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub eta: f64,
    pub eta_grid: Vec<f64>,
    pub depths: Vec<usize>,
    pub data: Option<PathBuf>,
    pub n_samples: usize,
    pub positive_rate: f64,
    pub separation: f64,
    pub undersample_ratio: usize,
    pub threshold: f64,
    pub image_size: usize,
    pub alpha: f64,
    pub clip: f64,
    pub grid: usize,
    pub modes: usize,
    pub checkpoint_every: usize,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for `experiment` at the given scale.
    pub fn preset(experiment: Experiment, preset: Preset) -> Self {
        let paper = preset == Preset::Paper;
        let mut c = Self {
            experiment,
            preset,
            seed: 1,
            cutoff: 10,
            layers: 6,
            steps: 2000,
            batch_size: 0,
            optimizer: OptimizerKind::Adam,
            lr: 0.03,
            decay: 0.0,
            nm_step: 0.1,
            gamma: 0.0,
            regularizer: RegKind::None,
            reg_strength: 0.0,
            init_std: 0.05,
            target: Target::Sin,
            noise: 0.1,
            n_train: 50,
            n_test: 50,
            eta: 0.0,
            eta_grid: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            depths: Vec::new(),
            data: None,
            n_samples: 4000,
            positive_rate: 0.05,
            separation: 4.0,
            undersample_ratio: 3,
            threshold: 0.61,
            image_size: 2,
            alpha: 1.4,
            clip: 1.5,
            grid: 41,
            modes: 3,
            checkpoint_every: 0,
            out: PathBuf::from("out").join(experiment.name()),
        };
        match experiment {
            Experiment::Curvefit => {
                c.gamma = 1.0;
                if paper {
                    c.depths = (1..=8).collect();
                }
            }
            Experiment::LossSweep | Experiment::Optimizers => c.gamma = 1.0,
            Experiment::Penalties => {
                c.steps = 60;
                c.optimizer = OptimizerKind::Sgd;
                c.lr = 0.1;
                c.decay = 0.25;
                // γ = 10 on the summed penalty overshoots to zero trace at lr 0.1
                c.gamma = 1.0;
                c.reg_strength = 0.5;
                c.batch_size = 50;
                c.init_std = 0.4;
                c.seed = 3;
            }
            Experiment::Fraud => {
                c.cutoff = if paper { 10 } else { 4 };
                c.layers = 4;
                c.steps = if paper { 50_000 } else { 2000 };
                c.batch_size = 24;
                c.optimizer = OptimizerKind::Sgd;
                c.lr = 0.01;
                c.init_std = 0.05;
                if paper {
                    c.n_samples = 284_807;
                    c.positive_rate = 0.00172;
                }
            }
            Experiment::Tetromino => {
                c.cutoff = if paper { 11 } else { 6 };
                c.layers = if paper { 25 } else { 12 };
                c.image_size = if paper { 4 } else { 2 };
                // at D = 6 the inputs alone lose ~3% past the cutoff, so γ = 100 swamps the fidelity term
                c.gamma = if paper { 100.0 } else { 10.0 };
                c.lr = if paper { 0.01 } else { 0.03 };
                c.init_std = if paper { 0.05 } else { 0.1 };
                c.steps = if paper { 5000 } else { 2000 };
            }
            Experiment::Autoencoder => {
                c.cutoff = 10;
                c.layers = 25;
                c.gamma = 100.0;
                c.lr = 0.01;
                c.steps = if paper { 5000 } else { 1500 };
            }
            Experiment::Decompose => {
                c.steps = 0;
                c.modes = if paper { 4 } else { 3 };
            }
        }
        c
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "cutoff" => self.cutoff = parse(key, v)?,
            "layers" => self.layers = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "optimizer" => {
                self.optimizer = match v {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    "nelder-mead" => OptimizerKind::NelderMead,
                    _ => return Err(Error::Config(format!("unknown optimizer `{v}`"))),
                }
            }
            "lr" => self.lr = parse(key, v)?,
            "decay" => self.decay = parse(key, v)?,
            "nm_step" => self.nm_step = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "regularizer" => {
                self.regularizer = match v {
                    "none" => RegKind::None,
                    "l1" => RegKind::L1,
                    "l2" => RegKind::L2,
                    _ => return Err(Error::Config(format!("unknown regularizer `{v}`"))),
                }
            }
            "reg_strength" => self.reg_strength = parse(key, v)?,
            "init_std" => self.init_std = parse(key, v)?,
            "target" => self.target = Target::parse(v)?,
            "noise" => self.noise = parse(key, v)?,
            "n_train" => self.n_train = parse(key, v)?,
            "n_test" => self.n_test = parse(key, v)?,
            "eta" => self.eta = parse(key, v)?,
            "eta_grid" => self.eta_grid = parse_list(key, v)?,
            "depths" => self.depths = parse_list(key, v)?,
            "data" => self.data = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "n_samples" => self.n_samples = parse(key, v)?,
            "positive_rate" => self.positive_rate = parse(key, v)?,
            "separation" => self.separation = parse(key, v)?,
            "undersample_ratio" => self.undersample_ratio = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "image_size" => self.image_size = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "clip" => self.clip = parse(key, v)?,
            "grid" => self.grid = parse(key, v)?,
            "modes" => self.modes = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every setting in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::Config(format!("config file {} does not exist", path.display())));
        }
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.cutoff < 1 {
            return bad("cutoff must be at least 1".into());
        }
        if self.layers < 1 {
            return bad("layers must be at least 1".into());
        }
        if let Some(p) = &self.data {
            if !p.exists() {
                return bad(format!("data file {} does not exist", p.display()));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        if let Some(e) = self.eta_grid.iter().find(|e| !(0.0..=0.3).contains(*e)) {
            return bad(format!("eta_grid value {e} outside [0, 0.3]"));
        }
        if self.depths.contains(&0) {
            return bad("depths must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.gamma >= 0.0 && self.reg_strength >= 0.0 && self.init_std >= 0.0) {
            return bad("lr, gamma, reg_strength and init_std must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.positive_rate) || !(0.0..=1.0).contains(&self.threshold) {
            return bad("positive_rate and threshold must lie in [0, 1]".into());
        }
        if self.image_size != 2 && self.image_size != 4 {
            return bad(format!("image_size {} (expected 2 or 4)", self.image_size));
        }
        if self.experiment == Experiment::Tetromino && self.cutoff < self.image_size {
            return bad("tetromino cutoff must be at least image_size".into());
        }
        if self.experiment == Experiment::Autoencoder && self.cutoff < 3 {
            return bad("autoencoder cutoff must be at least 3".into());
        }
        if self.grid < 2 || self.modes < 1 || self.clip <= 0.0 {
            return bad("grid ≥ 2, modes ≥ 1 and clip > 0 required".into());
        }
        Ok(())
    }

    pub fn optimizer_spec(&self) -> OptimizerSpec {
        match self.optimizer {
            OptimizerKind::Sgd => OptimizerSpec::sgd(self.lr, self.decay),
            OptimizerKind::Adam => OptimizerSpec::adam(self.lr),
            OptimizerKind::NelderMead => OptimizerSpec::nelder_mead(self.nm_step),
        }
    }

    pub fn regularizer_spec(&self) -> Regularizer {
        match self.regularizer {
            RegKind::None => Regularizer::None,
            RegKind::L1 => Regularizer::L1(self.reg_strength),
            RegKind::L2 => Regularizer::L2(self.reg_strength),
        }
    }

    pub fn batch(&self) -> Option<usize> {
        (self.batch_size > 0).then_some(self.batch_size)
    }

    /// The configuration as a config file that reproduces it.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "# experiment: {}", self.experiment.name());
        let opt = match self.optimizer {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::NelderMead => "nelder-mead",
        };
        let reg = match self.regularizer {
            RegKind::None => "none",
            RegKind::L1 => "l1",
            RegKind::L2 => "l2",
        };
        let rows: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("cutoff", self.cutoff.to_string()),
            ("layers", self.layers.to_string()),
            ("steps", self.steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("optimizer", opt.into()),
            ("lr", self.lr.to_string()),
            ("decay", self.decay.to_string()),
            ("nm_step", self.nm_step.to_string()),
            ("gamma", self.gamma.to_string()),
            ("regularizer", reg.into()),
            ("reg_strength", self.reg_strength.to_string()),
            ("init_std", self.init_std.to_string()),
            ("target", self.target.name().into()),
            ("noise", self.noise.to_string()),
            ("n_train", self.n_train.to_string()),
            ("n_test", self.n_test.to_string()),
            ("eta", self.eta.to_string()),
            ("eta_grid", list(&self.eta_grid)),
            ("depths", self.depths.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
            ("data", self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("n_samples", self.n_samples.to_string()),
            ("positive_rate", self.positive_rate.to_string()),
            ("separation", self.separation.to_string()),
            ("undersample_ratio", self.undersample_ratio.to_string()),
            ("threshold", self.threshold.to_string()),
            ("image_size", self.image_size.to_string()),
            ("alpha", self.alpha.to_string()),
            ("clip", self.clip.to_string()),
            ("grid", self.grid.to_string()),
            ("modes", self.modes.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("out", self.out.display().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("cannot parse `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}
