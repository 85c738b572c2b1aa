//! Training configuration file (config.json) and its mapping onto the core
//! trainer config plus encoder architecture.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use berm_core::encoder::EncoderHyper;
use berm_core::objective::NegativeMode;
use berm_core::train::{TrainConfig, TrainMode};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfigFile {
    pub mode: String,
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: u64,
    pub seed: u64,
    pub negatives: String,
    pub checkpoint_every: u64,
    pub dim: usize,
    pub blocks: usize,
    pub max_len: usize,
}

impl Default for TrainConfigFile {
    fn default() -> Self {
        TrainConfigFile {
            mode: "berm".into(),
            alpha: 0.1,
            beta: 1.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            epochs: 5,
            seed: 42,
            negatives: "in-batch".into(),
            checkpoint_every: 0,
            dim: 64,
            blocks: 2,
            max_len: 128,
        }
    }
}

impl TrainConfigFile {
    pub fn load(path: &Path) -> Result<TrainConfigFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn mode(&self) -> Result<TrainMode> {
        match self.mode.as_str() {
            "berm" => Ok(TrainMode::Berm),
            "control" => Ok(TrainMode::Control),
            other => bail!("unknown mode {other:?} (expected \"berm\" or \"control\")"),
        }
    }

    pub fn negative_mode(&self) -> Result<NegativeMode> {
        match self.negatives.as_str() {
            "in-batch" => Ok(NegativeMode::InBatch),
            "single" => Ok(NegativeMode::Single),
            "file" => Ok(NegativeMode::File),
            other => bail!(
                "unknown negatives mode {other:?} (expected \"in-batch\", \"single\", or \"file\")"
            ),
        }
    }

    pub fn to_core(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            alpha: self.alpha,
            beta: self.beta,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            negatives: self.negative_mode()?,
            checkpoint_every: self.checkpoint_every,
            mode: self.mode()?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn hyper(&self, vocab_size: usize) -> EncoderHyper {
        EncoderHyper {
            vocab_size,
            dim: self.dim,
            blocks: self.blocks,
            max_len: self.max_len,
        }
    }
}
