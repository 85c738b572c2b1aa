//! Self-describing JSON checkpoints: architecture, vocabulary, parameters,
//! and (for resumable training) optimizer state.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use berm_core::encoder::{EncoderHyper, EncoderParams};
use berm_core::text::Vocabulary;
use berm_core::train::{AdamState, TrainState};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub dim: usize,
    pub blocks: usize,
    pub max_len: usize,
    /// Token list in id order; index 0 is [CLS], 1 is [UNK].
    pub vocab: Vec<String>,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerState>,
    #[serde(default)]
    pub epochs_done: u64,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState, vocab: &Vocabulary, epochs_done: u64) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            dim: state.params.hyper.dim,
            blocks: state.params.hyper.blocks,
            max_len: state.params.hyper.max_len,
            vocab: vocab.tokens().to_vec(),
            params: state.params.data.clone(),
            optimizer: Some(OptimizerState {
                m: state.opt.m.clone(),
                v: state.opt.v.clone(),
                step: state.step,
            }),
            epochs_done,
        }
    }

    pub fn hyper(&self) -> EncoderHyper {
        EncoderHyper {
            vocab_size: self.vocab.len(),
            dim: self.dim,
            blocks: self.blocks,
            max_len: self.max_len,
        }
    }

    pub fn into_parts(self) -> Result<(EncoderParams, Vocabulary, Option<OptimizerState>, u64)> {
        let hyper = self.hyper();
        if self.params.len() != hyper.param_count() {
            bail!(
                "checkpoint parameter count {} does not match architecture ({} expected)",
                self.params.len(),
                hyper.param_count()
            );
        }
        if let Some(opt) = &self.optimizer {
            if opt.m.len() != self.params.len() || opt.v.len() != self.params.len() {
                bail!("checkpoint optimizer state does not match parameter count");
            }
        }
        let vocab = Vocabulary::from_tokens(self.vocab)?;
        let params = EncoderParams {
            hyper,
            data: self.params,
        };
        Ok((params, vocab, self.optimizer, self.epochs_done))
    }

    pub fn into_state(self) -> Result<(TrainState, Vocabulary, u64)> {
        let (params, vocab, optimizer, epochs_done) = self.into_parts()?;
        let n = params.data.len();
        let state = match optimizer {
            Some(opt) => TrainState {
                params,
                opt: AdamState { m: opt.m, v: opt.v },
                step: opt.step,
            },
            None => TrainState {
                params,
                opt: AdamState::zeros(n),
                step: 0,
            },
        };
        Ok((state, vocab, epochs_done))
    }
}

pub fn save(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let mut writer = crate::data::create(path)?;
    serde_json::to_writer(&mut writer, checkpoint)
        .with_context(|| format!("writing checkpoint {}", path.display()))?;
    use std::io::Write;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let reader = std::fs::File::open(path)
        .with_context(|| format!("opening checkpoint {}", path.display()))?;
    let checkpoint: Checkpoint = serde_json::from_reader(std::io::BufReader::new(reader))
        .with_context(|| format!("parsing checkpoint {}", path.display()))?;
    if checkpoint.version != CHECKPOINT_VERSION {
        bail!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            checkpoint.version
        );
    }
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use berm_core::encoder::EncoderParams;

    fn small_state() -> (TrainState, Vocabulary) {
        let vocab = Vocabulary::build(["alpha beta gamma"]);
        let hyper = EncoderHyper {
            vocab_size: vocab.len(),
            dim: 4,
            blocks: 1,
            max_len: 8,
        };
        (TrainState::new(EncoderParams::init(hyper, 3)), vocab)
    }

    #[test]
    fn roundtrip_preserves_everything_bitwise() {
        let (mut state, vocab) = small_state();
        state.step = 17;
        state.opt.m[0] = 0.123_456_789_123_456_78;
        let ckpt = Checkpoint::from_state(&state, &vocab, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save(&path, &ckpt).unwrap();
        let bytes_a = std::fs::read(&path).unwrap();
        save(&path, &load(&path).unwrap()).unwrap();
        let bytes_b = std::fs::read(&path).unwrap();
        assert_eq!(bytes_a, bytes_b, "re-save must be byte-identical");

        let (restored, vocab2, epochs) = load(&path).unwrap().into_state().unwrap();
        assert_eq!(restored.params.data, state.params.data);
        assert_eq!(restored.opt.m, state.opt.m);
        assert_eq!(restored.step, 17);
        assert_eq!(epochs, 4);
        assert_eq!(vocab2.tokens(), vocab.tokens());
    }

    #[test]
    fn version_and_shape_are_enforced() {
        let (state, vocab) = small_state();
        let mut ckpt = Checkpoint::from_state(&state, &vocab, 0);
        ckpt.version = 9;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        save(&path, &ckpt).unwrap();
        assert!(load(&path).is_err());

        let mut truncated = Checkpoint::from_state(&state, &vocab, 0);
        truncated.params.pop();
        assert!(truncated.into_state().is_err());
    }
}
