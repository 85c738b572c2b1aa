//! Mini-batch training loop: seeded shuffling, adaptive-moment updates,
//! a contrastive-only control mode, and built-in gradient verification.
//!
//! Reproducibility contract: identical seed, config, and input bytes give
//! bitwise-identical parameters at every step. Batch composition depends
//! only on (seed, epoch, pair count), so the control and full configurations
//! consume identical batches.

use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::objective::{
    batch_gradients, batch_objective, total_loss, LossBreakdown, LossWeights, NegativeMode,
    PairExample,
};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Full objective: contrastive + alpha * extract + beta * balance.
    Berm,
    /// Contrastive-only baseline; auxiliary losses are reported but carry
    /// zero weight.
    Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: u64,
    pub seed: u64,
    pub negatives: NegativeMode,
    /// Checkpoint every this many epochs; 0 = final checkpoint only.
    pub checkpoint_every: u64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            beta: 1.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            epochs: 5,
            seed: 42,
            negatives: NegativeMode::InBatch,
            checkpoint_every: 0,
            mode: TrainMode::Berm,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: &str| Error::BadConfig {
            detail: detail.into(),
        };
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(bad("alpha and beta must be non-negative"));
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(bad("learning_rate must be non-negative"));
        }
        if self.batch_size < 2 {
            return Err(bad("batch_size must be at least 2 for paired negatives"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(bad("moment decays must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Control mode forces the auxiliary weights to zero.
    pub fn loss_weights(&self) -> LossWeights {
        match self.mode {
            TrainMode::Berm => LossWeights {
                contrastive: 1.0,
                extract: self.alpha,
                balance: self.beta,
            },
            TrainMode::Control => LossWeights {
                contrastive: 1.0,
                extract: 0.0,
                balance: 0.0,
            },
        }
    }

    fn effective_alpha(&self) -> f64 {
        match self.mode {
            TrainMode::Berm => self.alpha,
            TrainMode::Control => 0.0,
        }
    }

    fn effective_beta(&self) -> f64 {
        match self.mode {
            TrainMode::Berm => self.beta,
            TrainMode::Control => 0.0,
        }
    }
}

/// First/second moment accumulators for the adaptive-moment update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn zeros(n: usize) -> AdamState {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: EncoderParams,
    pub opt: AdamState,
    pub step: u64,
}

impl TrainState {
    pub fn new(params: EncoderParams) -> TrainState {
        let n = params.data.len();
        TrainState {
            params,
            opt: AdamState::zeros(n),
            step: 0,
        }
    }
}

/// One optimizer step on one batch. Moments update with bias correction;
/// a zero learning rate leaves the parameters untouched but still counts
/// the step.
pub fn train_step(
    state: &mut TrainState,
    batch: &[PairExample],
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    let weights = config.loss_weights();
    let (grads, (l_c, l_e, l_b)) =
        batch_gradients(&state.params, batch, config.negatives, &weights)?;
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - libm::pow(config.beta1, t as f64);
    let bias2 = 1.0 - libm::pow(config.beta2, t as f64);
    for i in 0..grads.len() {
        let g = grads[i];
        state.opt.m[i] = config.beta1 * state.opt.m[i] + (1.0 - config.beta1) * g;
        state.opt.v[i] = config.beta2 * state.opt.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.opt.m[i] / bias1;
        let v_hat = state.opt.v[i] / bias2;
        state.params.data[i] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon);
    }
    Ok(total_loss(
        l_c,
        l_e,
        l_b,
        config.effective_alpha(),
        config.effective_beta(),
    ))
}

/// Batch index lists for one epoch: a seeded shuffle chunked to
/// `batch_size`, dropping a trailing chunk of fewer than two pairs.
pub fn epoch_batches(n_pairs: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_pairs).collect();
    let mut rng = Rng::derive(seed, 0x65706f63 ^ epoch);
    rng.shuffle(&mut order);
    let mut batches = Vec::new();
    for chunk in order.chunks(batch_size) {
        if chunk.len() >= 2 {
            batches.push(chunk.to_vec());
        }
    }
    batches
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: u64,
    pub steps: u64,
    pub mean: LossBreakdown,
}

/// Run `config.epochs` epochs starting at `start_epoch`, invoking the
/// callback with each epoch's mean loss breakdown and the state after it.
/// Epoch shuffles derive from (seed, epoch), so resuming from a checkpoint
/// replays the exact trajectory of an uninterrupted run.
pub fn train_epochs(
    state: &mut TrainState,
    data: &[PairExample],
    config: &TrainConfig,
    start_epoch: u64,
    mut on_epoch: impl FnMut(&EpochSummary, &TrainState),
) -> Result<()> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for epoch in start_epoch..config.epochs {
        let mut sums = (0.0, 0.0, 0.0);
        let mut steps = 0u64;
        for batch_idx in epoch_batches(data.len(), config.batch_size, config.seed, epoch) {
            let batch: Vec<PairExample> = batch_idx.iter().map(|&i| data[i].clone()).collect();
            let breakdown = train_step(state, &batch, config)?;
            sums.0 += breakdown.contrastive;
            sums.1 += breakdown.extract;
            sums.2 += breakdown.balance;
            steps += 1;
        }
        let denom = if steps == 0 { 1.0 } else { steps as f64 };
        let summary = EpochSummary {
            epoch,
            steps,
            mean: total_loss(
                sums.0 / denom,
                sums.1 / denom,
                sums.2 / denom,
                config.effective_alpha(),
                config.effective_beta(),
            ),
        };
        on_epoch(&summary, state);
    }
    Ok(())
}

/// Result of checking one loss term's analytic gradient against central
/// finite differences at randomly chosen coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TermCheck {
    pub term: &'static str,
    pub coords: usize,
    pub max_rel_err: f64,
    /// Coordinates whose relative error exceeded the tolerance.
    pub failures: Vec<CoordFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordFailure {
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub terms: Vec<TermCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.terms.iter().all(|t| t.failures.is_empty())
    }

    pub fn max_rel_err(&self) -> f64 {
        let mut worst = 0.0;
        for t in &self.terms {
            if t.max_rel_err > worst {
                worst = t.max_rel_err;
            }
        }
        worst
    }
}

/// Compare analytic and central finite-difference gradients of each loss
/// term (and the weighted total) at `coords` random parameter coordinates.
#[allow(clippy::too_many_arguments)]
pub fn verify_gradients(
    params: &EncoderParams,
    batch: &[PairExample],
    mode: NegativeMode,
    alpha: f64,
    beta: f64,
    coords: usize,
    step: f64,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let terms: [(&'static str, LossWeights); 4] = [
        (
            "contrastive",
            LossWeights {
                contrastive: 1.0,
                extract: 0.0,
                balance: 0.0,
            },
        ),
        (
            "extract",
            LossWeights {
                contrastive: 0.0,
                extract: 1.0,
                balance: 0.0,
            },
        ),
        (
            "balance",
            LossWeights {
                contrastive: 0.0,
                extract: 0.0,
                balance: 1.0,
            },
        ),
        (
            "total",
            LossWeights {
                contrastive: 1.0,
                extract: alpha,
                balance: beta,
            },
        ),
    ];
    let mut rng = Rng::derive(seed, 0x67726164);
    let mut report = GradCheckReport {
        tolerance,
        step,
        terms: Vec::new(),
    };
    for (name, weights) in terms {
        let (grads, _) = batch_gradients(params, batch, mode, &weights)?;
        let mut check = TermCheck {
            term: name,
            coords,
            max_rel_err: 0.0,
            failures: Vec::new(),
        };
        for _ in 0..coords {
            let i = rng.next_range(params.data.len());
            let mut plus = params.clone();
            plus.data[i] += step;
            let mut minus = params.clone();
            minus.data[i] -= step;
            let fp = batch_objective(&plus, batch, mode, &weights)?;
            let fm = batch_objective(&minus, batch, mode, &weights)?;
            let numeric = (fp - fm) / (2.0 * step);
            let analytic = grads[i];
            let denom = libm::fabs(analytic).max(libm::fabs(numeric)).max(1e-6);
            let rel_err = libm::fabs(analytic - numeric) / denom;
            if rel_err > check.max_rel_err {
                check.max_rel_err = rel_err;
            }
            if rel_err > tolerance {
                check.failures.push(CoordFailure {
                    coord: i,
                    analytic,
                    numeric,
                    rel_err,
                });
            }
        }
        report.terms.push(check);
    }
    Ok(report)
}
