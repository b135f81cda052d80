//! Versioned, checksummed JSON checkpoints and the resumable training session.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::plotdata::write_metrics;
use crate::error::{Error, Result};
use crate::learn::{Model, TrainConfig, TrainState};

pub const SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Everything needed to continue an experiment: the configuration (which
/// regenerates data and architecture), finished runs, and the run in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub finished: Vec<TrainState>,
    pub current: Option<TrainState>,
    /// Architecture and parameters of the run in progress.
    pub model: Value,
}

fn digest(body: &Value) -> Result<String> {
    let text = serde_json::to_string(body)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn checkpoint_save(ck: &Checkpoint, path: &Path) -> Result<()> {
    let body = serde_json::to_value(ck)?;
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "sha256": digest(&body)?,
        "body": body,
    });
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string(&doc)?)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|_| Error::CorruptCheckpoint)?;
    let found = doc.get("schema_version").and_then(Value::as_u64).ok_or(Error::CorruptCheckpoint)?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersionMismatch { found: found as u32, expected: SCHEMA_VERSION });
    }
    let sum = doc.get("sha256").and_then(Value::as_str).ok_or(Error::CorruptCheckpoint)?;
    let body = doc.get("body").ok_or(Error::CorruptCheckpoint)?;
    if digest(body)? != sum {
        return Err(Error::CorruptCheckpoint);
    }
    serde_json::from_value(body.clone()).map_err(|_| Error::CorruptCheckpoint)
}

/// Runs the training phases of one experiment, writing metrics and checkpoints
/// to the output directory. Runs are identified by their order.
#[derive(Debug)]
pub struct Session {
    pub config: ExperimentConfig,
    finished: Vec<TrainState>,
    resume: Option<TrainState>,
    next: usize,
    /// Write files (metrics, checkpoints) when set.
    pub persist: bool,
}

impl Session {
    pub fn new(config: ExperimentConfig) -> Self {
        Self { config, finished: Vec::new(), resume: None, next: 0, persist: true }
    }

    /// A session that writes nothing.
    pub fn in_memory(config: ExperimentConfig) -> Self {
        Self { persist: false, ..Self::new(config) }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        Self { config: ck.config, finished: ck.finished, resume: ck.current, next: 0, persist: true }
    }

    pub fn out(&self) -> &Path {
        &self.config.out
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.config.out.join(CHECKPOINT_FILE)
    }

    fn save(&self, current: Option<&TrainState>, model: Value) -> Result<()> {
        if !self.persist {
            return Ok(());
        }
        let ck = Checkpoint {
            config: self.config.clone(),
            finished: self.finished.clone(),
            current: current.cloned(),
            model,
        };
        checkpoint_save(&ck, &self.checkpoint_path())
    }

    /// Trains `model` for `tcfg.steps` steps (or replays a finished run) and
    /// writes `<label>_metrics.csv`. `snapshot` describes the model for checkpoints.
    pub fn train<M: Model + ?Sized>(
        &mut self,
        label: &str,
        model: &mut M,
        tcfg: &TrainConfig,
        snapshot: impl Fn(&M) -> Value,
    ) -> Result<TrainState> {
        let idx = self.next;
        self.next += 1;
        if self.persist {
            std::fs::create_dir_all(&self.config.out)?;
        }
        let st = if let Some(done) = self.finished.get(idx) {
            let st = done.clone();
            model.set_params(&st.params)?;
            st
        } else {
            let mut st = match self.resume.take() {
                Some(s) if idx == self.finished.len() => s,
                _ => TrainState::new(model.params(), tcfg),
            };
            let every = if self.config.checkpoint_every == 0 { usize::MAX } else { self.config.checkpoint_every };
            while st.step < tcfg.steps {
                let until = tcfg.steps.min(st.step.saturating_add(every));
                if let Err(e) = st.run(model, tcfg, until) {
                    self.save(Some(&st), snapshot(model))?;
                    return Err(e);
                }
                if st.step < tcfg.steps {
                    self.save(Some(&st), snapshot(model))?;
                }
            }
            model.set_params(&st.params)?;
            self.finished.push(st.clone());
            self.save(None, snapshot(model))?;
            st
        };
        if self.persist {
            write_metrics(&self.config.out.join(format!("{label}_metrics.csv")), &st.history)?;
        }
        Ok(st)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{Experiment, Preset};
    use crate::learn::OptimizerSpec;

    fn sample() -> Checkpoint {
        let cfg = ExperimentConfig::preset(Experiment::Curvefit, Preset::Desk);
        let tc = TrainConfig { steps: 3, batch_size: Some(2), optimizer: OptimizerSpec::adam(0.1), fd_step: 1e-4, seed: 3 };
        Checkpoint { config: cfg, finished: vec![], current: Some(TrainState::new(vec![0.25, -1.5], &tc)), model: Value::Null }
    }

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.json");
        let ck = sample();
        checkpoint_save(&ck, &p).unwrap();
        assert_eq!(checkpoint_load(&p).unwrap(), ck);
    }

    #[test]
    fn version_and_checksum_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.json");
        checkpoint_save(&sample(), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, text.replace("\"schema_version\":1", "\"schema_version\":2")).unwrap();
        assert!(matches!(checkpoint_load(&p), Err(Error::SchemaVersionMismatch { found: 2, expected: 1 })));
        std::fs::write(&p, text.replace("0.25", "0.26")).unwrap();
        assert!(matches!(checkpoint_load(&p), Err(Error::CorruptCheckpoint)));
        std::fs::write(&p, "{not json").unwrap();
        assert!(matches!(checkpoint_load(&p), Err(Error::CorruptCheckpoint)));
    }
}
