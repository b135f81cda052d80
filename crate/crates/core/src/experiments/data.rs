//! Datasets: noisy curves, tetromino images, fraud records.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{gates::coherent_amplitudes, FockState};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Sin,
    Cube,
    Sinc,
}

impl Target {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(Target::Sin),
            "cube" | "x3" => Ok(Target::Cube),
            "sinc" => Ok(Target::Sinc),
            "identity" => Err(Error::Config("use target = sin, cube or sinc".into())),
            _ => Err(Error::Config(format!("unknown target `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Sin => "sin",
            Target::Cube => "cube",
            Target::Sinc => "sinc",
        }
    }

    /// `sin(πx)`, `x³`, `sinc(πx) = sin(πx)/(πx)`.
    pub fn eval(self, x: f64) -> f64 {
        let px = std::f64::consts::PI * x;
        match self {
            Target::Sin => px.sin(),
            Target::Cube => x * x * x,
            Target::Sinc => {
                if px == 0.0 {
                    1.0
                } else {
                    px.sin() / px
                }
            }
        }
    }
}

/// Inputs uniform on `[-1, 1]`, noisy labels `f(x) + N(0, ε²)` and noiseless truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub x: Vec<f64>,
    pub noisy: Vec<f64>,
    pub truth: Vec<f64>,
}

impl CurveData {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Train and test sets drawn independently (a uniform random 50/50 split).
pub fn curve_data(target: Target, noise: f64, n_train: usize, n_test: usize, rng: &mut ChaCha8Rng) -> (CurveData, CurveData) {
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut draw = |n: usize| {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let truth: Vec<f64> = x.iter().map(|&v| target.eval(v)).collect();
        let noisy = truth.iter().map(|t| t + if noise > 0.0 { normal.sample(rng) } else { 0.0 }).collect();
        CurveData { x, noisy, truth }
    };
    let train = draw(n_train);
    let test = draw(n_test);
    (train, test)
}

/// Tetromino shapes in "LOTISJZ" order, 4×4 binary rows.
pub const TETROMINO_ORDER: &str = "LOTISJZ";

pub const TETROMINOS: [[[u8; 4]; 4]; 7] = [
    // L
    [[1, 0, 0, 0], [1, 0, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0]],
    // O
    [[0, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]],
    // T
    [[0, 0, 0, 0], [1, 1, 1, 0], [0, 1, 0, 0], [0, 0, 0, 0]],
    // I
    [[0, 1, 0, 0], [0, 1, 0, 0], [0, 1, 0, 0], [0, 1, 0, 0]],
    // S
    [[0, 0, 0, 0], [0, 1, 1, 0], [1, 1, 0, 0], [0, 0, 0, 0]],
    // J
    [[0, 1, 0, 0], [0, 1, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0]],
    // Z
    [[0, 0, 0, 0], [1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 0, 0]],
];

/// Pixel intensities of tetromino `k` at `size` 4 (the shape) or 2 (2×2 block averages).
pub fn tetromino_image(k: usize, size: usize) -> Result<Vec<Vec<f64>>> {
    let t = &TETROMINOS[k];
    match size {
        4 => Ok(t.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()),
        2 => Ok((0..2)
            .map(|i| {
                (0..2)
                    .map(|j| {
                        let s: u8 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| t[2 * i + a][2 * j + b]).sum();
                        s as f64 / 4.0
                    })
                    .collect()
            })
            .collect()),
        _ => Err(Error::Config(format!("image size {size} (expected 2 or 4)"))),
    }
}

/// `|A⟩ ∝ Σ √a_ij |i⟩|j⟩`, normalised.
pub fn image_state(image: &[Vec<f64>]) -> Result<FockState> {
    let n = image.len();
    if n < 2 || image.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("image must be square, at least 2×2".into()));
    }
    if image.iter().flatten().any(|&a| !(0.0..=1.0).contains(&a)) {
        return Err(Error::InvalidArgument("pixel intensities must lie in [0, 1]".into()));
    }
    let norm: f64 = image.iter().flatten().sum();
    if norm <= 0.0 {
        return Err(Error::InvalidArgument("blank image".into()));
    }
    let amps = image.iter().flatten().map(|&a| C64::new((a / norm).sqrt(), 0.0)).collect();
    FockState::from_amplitudes(2, n, amps)
}

/// Fock amplitudes of the seven input pairs `|φ_k⟩ = |a_k α⟩|b_k α⟩`.
pub fn tetromino_input_phases() -> [(C64, C64); 7] {
    let (one, i) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    [(one, one), (-one, -one), (one, -one), (-one, one), (i, i), (-i, -i), (i, one)]
}

pub fn tetromino_inputs(alpha: f64, cutoff: usize) -> Result<Vec<FockState>> {
    tetromino_input_phases()
        .iter()
        .map(|&(a, b)| {
            FockState::product_of(&[coherent_amplitudes(a * alpha, cutoff), coherent_amplitudes(b * alpha, cutoff)], cutoff)
        })
        .collect()
}

/// `⟨α₁|α₂⟩` for Fock-amplitude coherent states.
pub fn coherent_overlap(a: C64, b: C64) -> C64 {
    (-(a.norm_sqr() + b.norm_sqr()) / 2.0 + a.conj() * b).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FraudRecord {
    pub features: Vec<f64>,
    pub label: u8,
}

/// Number of leading features the model consumes.
pub const FRAUD_FEATURES: usize = 10;

/// Reads `Time,V1..V28,Amount,Class`; keeps V1..V10 and the label.
pub fn load_fraud_csv(path: &Path) -> Result<Vec<FraudRecord>> {
    if !path.exists() {
        return Err(Error::MissingData(path.display().to_string()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut expected = vec!["Time".to_string()];
    expected.extend((1..=28).map(|k| format!("V{k}")));
    expected.extend(["Amount".to_string(), "Class".to_string()]);
    let got: Vec<String> = headers.iter().map(|h| h.trim().trim_matches('"').to_string()).collect();
    if got != expected {
        return Err(Error::SchemaMismatch(format!("expected columns Time,V1..V28,Amount,Class; found {}", got.join(","))));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .trim_matches('"')
                .parse::<f64>()
                .map_err(|_| Error::SchemaMismatch(format!("row {}: column {} is not numeric", row + 2, expected[k])))
        };
        let features = (1..=FRAUD_FEATURES).map(parse).collect::<Result<Vec<_>>>()?;
        let label = parse(30)?;
        if label != 0.0 && label != 1.0 {
            return Err(Error::SchemaMismatch(format!("row {}: label {label}", row + 2)));
        }
        out.push(FraudRecord { features, label: label as u8 });
    }
    if out.is_empty() {
        return Err(Error::MissingData(format!("{} has no rows", path.display())));
    }
    Ok(out)
}

/// Two Gaussian blobs in `FRAUD_FEATURES` dimensions with unit variance, centred at
/// `∓separation/2` along the all-ones direction (normalised).
pub fn synthetic_fraud(n: usize, positive_rate: f64, separation: f64, rng: &mut ChaCha8Rng) -> Vec<FraudRecord> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dir = 1.0 / (FRAUD_FEATURES as f64).sqrt();
    let n_pos = ((n as f64 * positive_rate).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut out: Vec<FraudRecord> = (0..n)
        .map(|k| {
            let label = u8::from(k < n_pos);
            let shift = if label == 1 { separation / 2.0 } else { -separation / 2.0 };
            let features = (0..FRAUD_FEATURES).map(|_| normal.sample(rng) + shift * dir).collect();
            FraudRecord { features, label }
        })
        .collect();
    out.shuffle(rng);
    out
}

/// Splits frauds in half; the training half is joined by `ratio` times as many
/// genuine records, the test set by all remaining genuine records.
pub fn fraud_split(records: &[FraudRecord], ratio: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<FraudRecord>, Vec<FraudRecord>)> {
    let mut fraud: Vec<&FraudRecord> = records.iter().filter(|r| r.label == 1).collect();
    let mut genuine: Vec<&FraudRecord> = records.iter().filter(|r| r.label == 0).collect();
    if fraud.len() < 2 || genuine.is_empty() {
        return Err(Error::MissingData("need at least two fraud and one genuine record".into()));
    }
    fraud.shuffle(rng);
    genuine.shuffle(rng);
    let half = fraud.len() / 2;
    let n_gen = (half * ratio).min(genuine.len());
    let mut train: Vec<FraudRecord> = fraud[..half].iter().chain(&genuine[..n_gen]).map(|r| (*r).clone()).collect();
    let mut test: Vec<FraudRecord> = fraud[half..].iter().chain(&genuine[n_gen..]).map(|r| (*r).clone()).collect();
    train.shuffle(rng);
    test.shuffle(rng);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tetrominos_have_four_cells() {
        assert_eq!(TETROMINO_ORDER.len(), 7);
        for t in &TETROMINOS {
            assert_eq!(t.iter().flatten().filter(|&&v| v == 1).count(), 4);
        }
        for k in 0..7 {
            let img = tetromino_image(k, 2).unwrap();
            assert!((img.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tetromino_input_table() {
        let p = tetromino_input_phases();
        let (one, i) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        assert_eq!(p[0], (one, one));
        assert_eq!(p[1], (-one, -one));
        assert_eq!(p[2], (one, -one));
        assert_eq!(p[3], (-one, one));
        assert_eq!(p[4], (i, i));
        assert_eq!(p[5], (-i, -i));
        assert_eq!(p[6], (i, one));
        let states = tetromino_inputs(1.4, 12).unwrap();
        let a = states[0].amplitudes().unwrap();
        assert!((a[13] - coherent_amplitudes(C64::new(1.4, 0.0), 12)[1].powi(2)).norm() < 1e-15);
    }

    #[test]
    fn image_state_norm_and_uniform_overlap() {
        let s = image_state(&tetromino_image(0, 4).unwrap()).unwrap();
        assert!((s.trace - 1.0).abs() < 1e-14);
        let uniform = image_state(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let vac = FockState::vacuum(2, 2).unwrap();
        assert!((vac.inner(&uniform).unwrap().norm() - 0.5).abs() < 1e-15);
        assert!(image_state(&[vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn coherent_overlap_matches_states() {
        let (a, b) = (C64::new(0.3, -0.2), C64::new(-0.1, 0.5));
        let sa = FockState::product_of(&[coherent_amplitudes(a, 30)], 30).unwrap();
        let sb = FockState::product_of(&[coherent_amplitudes(b, 30)], 30).unwrap();
        assert!((sa.inner(&sb).unwrap() - coherent_overlap(a, b)).norm() < 1e-12);
    }

    #[test]
    fn curve_data_is_seeded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(curve_data(Target::Sin, 0.1, 5, 5, &mut r1), curve_data(Target::Sin, 0.1, 5, 5, &mut r2));
        assert_eq!(Target::Sinc.eval(0.0), 1.0);
        assert!((Target::Sin.eval(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fraud_split_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let recs = synthetic_fraud(1000, 0.05, 4.0, &mut rng);
        assert_eq!(recs.iter().filter(|r| r.label == 1).count(), 50);
        let (train, test) = fraud_split(&recs, 3, &mut rng).unwrap();
        let pos = train.iter().filter(|r| r.label == 1).count();
        assert_eq!(pos, 25);
        assert_eq!(train.len(), 100);
        assert_eq!(test.len(), 900);
    }

    #[test]
    fn fraud_csv_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let mut header = vec!["Time".to_string()];
        header.extend((1..=28).map(|k| format!("V{k}")));
        header.extend(["Amount".into(), "Class".into()]);
        let row: Vec<String> = (0..31).map(|k| if k == 30 { "1".into() } else { format!("{}", k as f64 * 0.1) }).collect();
        std::fs::write(&p, format!("{}\n{}\n", header.join(","), row.join(","))).unwrap();
        let recs = load_fraud_csv(&p).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].label, 1);
        assert!((recs[0].features[0] - 0.1).abs() < 1e-12);
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(load_fraud_csv(&p), Err(Error::SchemaMismatch(_))));
        assert!(matches!(load_fraud_csv(&dir.path().join("none.csv")), Err(Error::MissingData(_))));
    }
}
