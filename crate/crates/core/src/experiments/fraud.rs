//! Hybrid classical-quantum fraud classifier.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Session;
use super::curve::{qnn_snapshot, train_config};
use super::data::{fraud_split, load_fraud_csv, synthetic_fraud, FraudRecord, FRAUD_FEATURES};
use super::plotdata::{write_csv, write_json};
use crate::classical::{Activation, Mlp};
use crate::error::Result;
use crate::learn::{InputSource, LossSpec, LossVariant, QnnModel, Targets};
use crate::network::{Architecture, LayerMask, LayerParams, Readout};

/// Classical network widths: features, two hidden layers, quantum controls.
pub const FRAUD_MLP: [usize; 4] = [FRAUD_FEATURES, 10, 10, 14];

/// Classical encoder plus a two-mode network: a controlled input layer without
/// its first interferometer, then `layers` free layers.
pub fn fraud_model(train: &[FraudRecord], cfg_layers: usize, cutoff: usize, init_std: f64, gamma: f64, rng: &mut ChaCha8Rng) -> Result<QnnModel> {
    let net = Mlp::glorot(&FRAUD_MLP, Activation::Elu, Activation::Identity, rng);
    let mut input = LayerParams::identity(2);
    input.mask = LayerMask { u1: false, ..LayerMask::default() };
    let mut layers = vec![input];
    layers.extend((0..cfg_layers).map(|_| LayerParams::random(2, init_std, rng)));
    let mut arch = Architecture::feedforward(layers, cutoff);
    arch.readout = Readout::SinglePhotonPostselect;
    let features = train.iter().map(|r| r.features.clone()).collect();
    let labels = train.iter().map(|r| r.label as usize).collect();
    let loss = LossSpec { gamma, ..LossSpec::new(LossVariant::SinglePhotonClass) };
    QnnModel::new(arch, InputSource::Hybrid { net, features, clip: None }, Targets::SinglePhoton { labels }, loss)
}

/// Post-selected probability that the photon is in the genuine mode; `0.5`
/// when no single-photon event is possible.
pub fn genuine_scores(model: &QnnModel, params: &[f64], records: &[FraudRecord]) -> Result<Vec<f64>> {
    let mut m = model.clone();
    if let InputSource::Hybrid { features, .. } = &mut m.inputs {
        *features = records.iter().map(|r| r.features.clone()).collect();
    }
    m.targets = Targets::SinglePhoton { labels: vec![0; records.len()] };
    let items: Vec<usize> = (0..records.len()).collect();
    let mut scores = Vec::with_capacity(records.len());
    for chunk in items.chunks(256) {
        for s in m.outputs(params, chunk)? {
            let g = s.photon_prob(&[1, 0])?;
            let f = s.photon_prob(&[0, 1])?;
            scores.push(if g + f > 1e-12 { g / (g + f) } else { 0.5 });
        }
    }
    Ok(scores)
}

/// Rows are true class (genuine, fraud); columns predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub genuine_as_genuine: usize,
    pub genuine_as_fraud: usize,
    pub fraud_as_genuine: usize,
    pub fraud_as_fraud: usize,
}

/// A record is called genuine when its score reaches the threshold.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Confusion {
    let mut c = Confusion { genuine_as_genuine: 0, genuine_as_fraud: 0, fraud_as_genuine: 0, fraud_as_fraud: 0 };
    for (&s, &l) in scores.iter().zip(labels) {
        match (l, s >= threshold) {
            (0, true) => c.genuine_as_genuine += 1,
            (0, false) => c.genuine_as_fraud += 1,
            (_, true) => c.fraud_as_genuine += 1,
            (_, false) => c.fraud_as_fraud += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub true_negative_rate: f64,
    pub false_negative_rate: f64,
}

/// True negative rate (genuine kept) against false negative rate (fraud
/// passed as genuine), one point per threshold.
pub fn roc_curve(scores: &[f64], labels: &[u8], thresholds: &[f64]) -> Vec<RocPoint> {
    let n_gen = labels.iter().filter(|&&l| l == 0).count().max(1) as f64;
    let n_fr = labels.iter().filter(|&&l| l != 0).count().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| {
            let c = confusion(scores, labels, t);
            RocPoint {
                threshold: t,
                true_negative_rate: c.genuine_as_genuine as f64 / n_gen,
                false_negative_rate: c.fraud_as_genuine as f64 / n_fr,
            }
        })
        .collect()
}

/// Exact area under the ROC curve: the probability that a genuine record
/// scores above a fraudulent one, ties counting half.
pub fn roc_area(scores: &[f64], labels: &[u8]) -> f64 {
    let mut pairs: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_gen = pairs.iter().filter(|p| p.1 == 0).count() as f64;
    let n_fr = pairs.len() as f64 - n_gen;
    if n_gen == 0.0 || n_fr == 0.0 {
        return f64::NAN;
    }
    let mut frauds_below = 0.0;
    let mut acc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let (g, f) = pairs[i..j].iter().fold((0.0, 0.0), |(g, f), p| if p.1 == 0 { (g + 1.0, f) } else { (g, f + 1.0) });
        acc += g * (frauds_below + 0.5 * f);
        frauds_below += f;
        i = j;
    }
    acc / (n_gen * n_fr)
}

pub fn default_thresholds(extra: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    t.push(extra);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FraudReport {
    pub source: String,
    pub n_train: usize,
    pub n_test: usize,
    pub steps: usize,
    pub threshold: f64,
    pub confusion: Confusion,
    pub auc: f64,
    pub roc_monotone: bool,
    pub roc: Vec<RocPoint>,
}

pub fn run_fraud(session: &mut Session) -> Result<FraudReport> {
    let cfg = session.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (records, source) = match &cfg.data {
        Some(p) => (load_fraud_csv(p)?, p.display().to_string()),
        None => (
            synthetic_fraud(cfg.n_samples, cfg.positive_rate, cfg.separation, &mut rng),
            format!("synthetic blobs, separation {}", cfg.separation),
        ),
    };
    let (train, test) = fraud_split(&records, cfg.undersample_ratio, &mut rng)?;
    let mut model = fraud_model(&train, cfg.layers, cfg.cutoff, cfg.init_std, cfg.gamma, &mut rng)?;
    let st = session.train("fraud", &mut model, &train_config(&cfg, cfg.optimizer_spec()), qnn_snapshot)?;
    let scores = genuine_scores(&model, &st.params, &test)?;
    let labels: Vec<u8> = test.iter().map(|r| r.label).collect();
    let roc = roc_curve(&scores, &labels, &default_thresholds(cfg.threshold));
    let roc_monotone = roc
        .windows(2)
        .all(|w| w[1].true_negative_rate <= w[0].true_negative_rate && w[1].false_negative_rate <= w[0].false_negative_rate);
    let report = FraudReport {
        source,
        n_train: train.len(),
        n_test: test.len(),
        steps: cfg.steps,
        threshold: cfg.threshold,
        confusion: confusion(&scores, &labels, cfg.threshold),
        auc: roc_area(&scores, &labels),
        roc_monotone,
        roc,
    };
    if session.persist {
        let rows: Vec<Vec<f64>> =
            report.roc.iter().map(|p| vec![p.threshold, p.true_negative_rate, p.false_negative_rate]).collect();
        write_csv(&session.out().join("roc.csv"), "threshold,true_negative_rate,false_negative_rate", &rows)?;
        let c = report.confusion;
        let rows = vec![
            vec!["genuine".to_string(), c.genuine_as_genuine.to_string(), c.genuine_as_fraud.to_string()],
            vec!["fraud".to_string(), c.fraud_as_genuine.to_string(), c.fraud_as_fraud.to_string()],
        ];
        write_csv(&session.out().join("confusion.csv"), "true_class,predicted_genuine,predicted_fraud", &rows)?;
        write_json(&session.out().join("summary.json"), &report)?;
    }
    Ok(report)
}
