//! The training objective: contrastive task loss plus two unit-level
//! constraints, with analytic gradients through the full encoder.
//!
//! For a positive pair with unit embeddings E and text representation t_p:
//!   balance  = KL(uniform || softmax(dot(t_p, e_i)))
//!   extract  = -log softmax(dot(m, e_i))[label],  m = GELU(t_q * t_p)
//!   contrast = -log softmax([dot(t_q,t_p+), dot(t_q,t_p-_j)...])[0]
//! total = contrast + alpha * extract + beta * balance. Raw dot products are
//! passed through softmax before the KL/log because they are not themselves
//! probabilities. Batch losses are arithmetic means over pairs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::{matching_representation, unit_embeddings, EncoderParams, ForwardCache};
use crate::error::{Error, Result};
use crate::math::{dot, gelu_prime, log_sum_exp, softmax, RowMatrix};
use crate::text::UnitSpan;

/// Reported loss terms. `total` always equals
/// `contrastive + alpha * extract + beta * balance` as computed here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub contrastive: f64,
    pub extract: f64,
    pub balance: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// total = l_c + alpha * l_extract + beta * l_balance.
pub fn total_loss(
    contrastive: f64,
    extract: f64,
    balance: f64,
    alpha: f64,
    beta: f64,
) -> LossBreakdown {
    LossBreakdown {
        contrastive,
        extract,
        balance,
        total: contrastive + alpha * extract + beta * balance,
        alpha,
        beta,
    }
}

/// KL divergence from the uniform distribution to the softmax of
/// unit-similarity logits. Zero iff the logits are constant; zero for n = 1.
pub fn balance_loss(t_p: &[f64], units: &RowMatrix<f64>) -> Result<f64> {
    let n = units.rows;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if t_p.iter().any(|x| !x.is_finite()) || units.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "balance_loss",
        });
    }
    if n == 1 {
        return Ok(0.0);
    }
    let logits: Vec<f64> = (0..n).map(|i| dot(t_p, units.row(i))).collect();
    let lse = log_sum_exp(&logits);
    let b = 1.0 / n as f64;
    let ln_b = libm::log(b);
    let mut kl = 0.0;
    for &l in &logits {
        kl += b * (ln_b - (l - lse));
    }
    Ok(kl.max(0.0))
}

/// Cross-entropy of the labeled unit under softmax(dot(m, e_i)).
pub fn extract_loss(m: &[f64], units: &RowMatrix<f64>, label: usize) -> Result<f64> {
    let n = units.rows;
    if label >= n {
        return Err(Error::InvalidLabel { label, units: n });
    }
    let logits: Vec<f64> = (0..n).map(|i| dot(m, units.row(i))).collect();
    Ok((log_sum_exp(&logits) - logits[label]).max(0.0))
}

/// Negative log-likelihood of the positive among the negatives under
/// softmax of dot products, computed with max-logit subtraction.
pub fn contrastive_loss(t_q: &[f64], t_p_pos: &[f64], negatives: &[&[f64]]) -> Result<f64> {
    if negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let mut logits = Vec::with_capacity(negatives.len() + 1);
    logits.push(dot(t_q, t_p_pos));
    for neg in negatives {
        logits.push(dot(t_q, neg));
    }
    Ok((log_sum_exp(&logits) - logits[0]).max(0.0))
}

/// How negatives are drawn for the contrastive term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeMode {
    /// Positives of the other pairs in the batch.
    InBatch,
    /// Exactly one negative: the next pair's positive.
    Single,
    /// In-batch negatives plus the pair's file-supplied hard negatives.
    File,
}

/// One training pair: tokenized query and positive passage, the passage's
/// aligned units, the essential-unit label, and optional hard negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub query_id: String,
    pub passage_id: String,
    pub query: Vec<u32>,
    pub passage: Vec<u32>,
    pub units: Vec<UnitSpan>,
    pub label: usize,
    pub negatives: Vec<Vec<u32>>,
}

impl PairExample {
    /// Annotation units must tile the passage's content tokens exactly;
    /// anything else means the annotation was made under a different
    /// tokenizer configuration.
    pub fn validate(&self) -> Result<()> {
        let misaligned = |detail: &str| Error::Misaligned {
            query_id: self.query_id.clone(),
            passage_id: self.passage_id.clone(),
            detail: detail.into(),
        };
        if self.units.is_empty() {
            return Err(misaligned("no units"));
        }
        if self.label >= self.units.len() {
            return Err(misaligned("label outside unit list"));
        }
        let mut expect = 1usize;
        for unit in &self.units {
            if unit.tok_start != expect || unit.tok_end <= unit.tok_start {
                return Err(misaligned("units do not tile content tokens"));
            }
            expect = unit.tok_end;
        }
        if expect != self.passage.len() {
            return Err(misaligned("units do not cover the token sequence"));
        }
        if self.query.len() < 2 {
            return Err(misaligned("query has no content tokens"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub contrastive: f64,
    pub extract: f64,
    pub balance: f64,
}

/// Mean (contrastive, extract, balance) over the batch, forward only.
pub fn batch_parts(
    params: &EncoderParams,
    batch: &[PairExample],
    mode: NegativeMode,
) -> Result<(f64, f64, f64)> {
    let (_, parts) = run_batch(params, batch, mode, None)?;
    Ok(parts)
}

/// Scalar objective w . parts; the quantity `batch_gradients` differentiates.
pub fn batch_objective(
    params: &EncoderParams,
    batch: &[PairExample],
    mode: NegativeMode,
    weights: &LossWeights,
) -> Result<f64> {
    let (c, e, b) = batch_parts(params, batch, mode)?;
    Ok(weights.contrastive * c + weights.extract * e + weights.balance * b)
}

/// Gradient of the weighted mean batch loss w.r.t. every parameter, plus the
/// mean parts. The returned buffer has the same layout as `params.data`.
pub fn batch_gradients(
    params: &EncoderParams,
    batch: &[PairExample],
    mode: NegativeMode,
    weights: &LossWeights,
) -> Result<(Vec<f64>, (f64, f64, f64))> {
    let (grads, parts) = run_batch(params, batch, mode, Some(weights))?;
    Ok((grads.expect("gradients requested"), parts))
}

/// Spec-level `gradients` entry point: weights (1, alpha, beta) and a full
/// breakdown of the batch means.
pub fn gradients(
    params: &EncoderParams,
    batch: &[PairExample],
    mode: NegativeMode,
    alpha: f64,
    beta: f64,
) -> Result<(Vec<f64>, LossBreakdown)> {
    let weights = LossWeights {
        contrastive: 1.0,
        extract: alpha,
        balance: beta,
    };
    let (grads, (c, e, b)) = batch_gradients(params, batch, mode, &weights)?;
    Ok((grads, total_loss(c, e, b, alpha, beta)))
}

struct SeqState {
    tokens: Vec<u32>,
    z: RowMatrix<f64>,
    cache: Option<ForwardCache>,
    d_z: Option<RowMatrix<f64>>,
}

fn encode(params: &EncoderParams, tokens: &[u32], want_grads: bool) -> Result<SeqState> {
    let (z, cache) = if want_grads {
        let (z, cache) = params.forward_cached(tokens)?;
        (z, Some(cache))
    } else {
        (params.forward(tokens)?, None)
    };
    let d_z = want_grads.then(|| RowMatrix::zeros(z.rows, z.cols));
    Ok(SeqState {
        tokens: tokens.to_vec(),
        z,
        cache,
        d_z,
    })
}

fn add_row(d_z: &mut RowMatrix<f64>, row: usize, delta: &[f64]) {
    for (o, &d) in d_z.row_mut(row).iter_mut().zip(delta) {
        *o += d;
    }
}

type BatchOutput = (Option<Vec<f64>>, (f64, f64, f64));

fn run_batch(
    params: &EncoderParams,
    batch: &[PairExample],
    mode: NegativeMode,
    weights: Option<&LossWeights>,
) -> Result<BatchOutput> {
    let b_count = batch.len();
    if b_count == 0 {
        return Err(Error::EmptyBatch);
    }
    if mode == NegativeMode::Single && b_count < 2 {
        return Err(Error::EmptyNegatives);
    }
    for pair in batch {
        pair.validate()?;
    }
    let want_grads = weights.is_some();

    let mut queries = Vec::with_capacity(b_count);
    let mut passages = Vec::with_capacity(b_count);
    let mut negs: Vec<Vec<SeqState>> = Vec::with_capacity(b_count);
    for pair in batch {
        queries.push(encode(params, &pair.query, want_grads)?);
        passages.push(encode(params, &pair.passage, want_grads)?);
        let mut pair_negs = Vec::new();
        if mode == NegativeMode::File {
            for neg in &pair.negatives {
                pair_negs.push(encode(params, neg, want_grads)?);
            }
        }
        negs.push(pair_negs);
    }

    let dim = params.hyper.dim;
    let t_q: Vec<Vec<f64>> = queries.iter().map(|s| s.z.row(0).to_vec()).collect();
    let t_p: Vec<Vec<f64>> = passages.iter().map(|s| s.z.row(0).to_vec()).collect();
    let unit_embs: Vec<RowMatrix<f64>> = batch
        .iter()
        .zip(&passages)
        .map(|(pair, seq)| unit_embeddings(&seq.z, &pair.units))
        .collect::<Result<_>>()?;
    let matching: Vec<Vec<f64>> = batch
        .iter()
        .enumerate()
        .map(|(i, _)| matching_representation(&t_q[i], &t_p[i]))
        .collect::<Result<_>>()?;

    let inv_b = 1.0 / b_count as f64;
    let mut sum_c = 0.0;
    let mut sum_e = 0.0;
    let mut sum_b = 0.0;

    // Pair-level representation gradients, filled while summing losses.
    let mut d_tq = vec![vec![0.0; dim]; b_count];
    let mut d_tp = vec![vec![0.0; dim]; b_count];
    let mut d_units: Vec<RowMatrix<f64>> = unit_embs
        .iter()
        .map(|e| RowMatrix::zeros(e.rows, e.cols))
        .collect();
    let mut d_negs: Vec<Vec<Vec<f64>>> = negs
        .iter()
        .map(|pn| pn.iter().map(|_| vec![0.0; dim]).collect())
        .collect();

    for (i, pair) in batch.iter().enumerate() {
        // contrastive candidates: positive first, then negatives in a fixed
        // order (other pairs ascending, then file negatives)
        enum Cand {
            Pos(usize),
            Neg(usize, usize),
        }
        // a batch may hold several pairs over one passage (different queries
        // targeting different units); that passage must not appear among its
        // own negatives
        let mut cands = vec![Cand::Pos(i)];
        match mode {
            NegativeMode::InBatch | NegativeMode::File => {
                for j in 0..b_count {
                    if j != i && batch[j].passage_id != pair.passage_id {
                        cands.push(Cand::Pos(j));
                    }
                }
                if mode == NegativeMode::File {
                    for k in 0..negs[i].len() {
                        cands.push(Cand::Neg(i, k));
                    }
                }
            }
            NegativeMode::Single => {
                let partner = (1..b_count)
                    .map(|step| (i + step) % b_count)
                    .find(|&j| batch[j].passage_id != pair.passage_id);
                if let Some(j) = partner {
                    cands.push(Cand::Pos(j));
                }
            }
        }
        if cands.len() < 2 {
            return Err(Error::EmptyNegatives);
        }
        let vec_of = |c: &Cand| -> &[f64] {
            match *c {
                Cand::Pos(j) => &t_p[j],
                Cand::Neg(j, k) => queries_neg_vec(&negs, j, k),
            }
        };
        let logits: Vec<f64> = cands.iter().map(|c| dot(&t_q[i], vec_of(c))).collect();
        let l_c = log_sum_exp(&logits) - logits[0];

        let e = &unit_embs[i];
        let n = e.rows;
        let b_target = 1.0 / n as f64;
        let bal_logits: Vec<f64> = (0..n).map(|j| dot(&t_p[i], e.row(j))).collect();
        let l_bal = if n == 1 {
            0.0
        } else {
            let lse = log_sum_exp(&bal_logits);
            let ln_b = libm::log(b_target);
            bal_logits
                .iter()
                .map(|&l| b_target * (ln_b - (l - lse)))
                .sum::<f64>()
        };
        let ext_logits: Vec<f64> = (0..n).map(|j| dot(&matching[i], e.row(j))).collect();
        let l_ext = log_sum_exp(&ext_logits) - ext_logits[pair.label];

        if !l_c.is_finite() || !l_bal.is_finite() || !l_ext.is_finite() {
            return Err(Error::NonFiniteLoss {
                query_id: pair.query_id.clone(),
                passage_id: pair.passage_id.clone(),
            });
        }
        sum_c += l_c;
        sum_e += l_ext;
        sum_b += l_bal;

        let Some(w) = weights else { continue };

        // contrastive: d logit_k = (p_k - [k==0]) * w_c / B
        let probs = softmax(&logits);
        for (k, cand) in cands.iter().enumerate() {
            let mut g = probs[k] * w.contrastive * inv_b;
            if k == 0 {
                g -= w.contrastive * inv_b;
            }
            for (o, &tv) in d_tq[i].iter_mut().zip(vec_of(cand)) {
                *o += g * tv;
            }
            match *cand {
                Cand::Pos(j) => {
                    for (o, &qv) in d_tp[j].iter_mut().zip(&t_q[i]) {
                        *o += g * qv;
                    }
                }
                Cand::Neg(j, k2) => {
                    for (o, &qv) in d_negs[j][k2].iter_mut().zip(&t_q[i]) {
                        *o += g * qv;
                    }
                }
            }
        }

        // balance: d logit_j = (q_j - 1/n) * w_b / B
        if n > 1 {
            let q = softmax(&bal_logits);
            for j in 0..n {
                let g = (q[j] - b_target) * w.balance * inv_b;
                for (o, &ev) in d_tp[i].iter_mut().zip(e.row(j)) {
                    *o += g * ev;
                }
                for (o, &tv) in d_units[i].row_mut(j).iter_mut().zip(&t_p[i]) {
                    *o += g * tv;
                }
            }
        }

        // extract: d logit_j = (q_j - y_j) * w_e / B, then through the GELU
        let q = softmax(&ext_logits);
        let mut d_m = vec![0.0; dim];
        for j in 0..n {
            let mut g = q[j] * w.extract * inv_b;
            if j == pair.label {
                g -= w.extract * inv_b;
            }
            for (o, &ev) in d_m.iter_mut().zip(e.row(j)) {
                *o += g * ev;
            }
            for (o, &mv) in d_units[i].row_mut(j).iter_mut().zip(&matching[i]) {
                *o += g * mv;
            }
        }
        for c in 0..dim {
            let u = t_q[i][c] * t_p[i][c];
            let du = d_m[c] * gelu_prime(u);
            d_tq[i][c] += du * t_p[i][c];
            d_tp[i][c] += du * t_q[i][c];
        }
    }

    let parts = (sum_c * inv_b, sum_e * inv_b, sum_b * inv_b);
    if weights.is_none() {
        return Ok((None, parts));
    }

    // Scatter representation gradients into per-sequence dZ and backprop,
    // in a fixed order for bitwise reproducibility.
    let mut grads = params.zeros_like();
    for i in 0..b_count {
        let q_seq = &mut queries[i];
        add_row(q_seq.d_z.as_mut().expect("grad mode"), 0, &d_tq[i]);
        let p_seq = &mut passages[i];
        let d_z = p_seq.d_z.as_mut().expect("grad mode");
        add_row(d_z, 0, &d_tp[i]);
        for (j, unit) in batch[i].units.iter().enumerate() {
            let inv = 1.0 / unit.token_count() as f64;
            let de: Vec<f64> = d_units[i].row(j).iter().map(|&x| x * inv).collect();
            for row in unit.tok_start..unit.tok_end {
                add_row(d_z, row, &de);
            }
        }
        for (k, neg_seq) in negs[i].iter_mut().enumerate() {
            add_row(neg_seq.d_z.as_mut().expect("grad mode"), 0, &d_negs[i][k]);
        }
    }
    for i in 0..b_count {
        backprop_seq(params, &queries[i], &mut grads);
        backprop_seq(params, &passages[i], &mut grads);
        for neg_seq in &negs[i] {
            backprop_seq(params, neg_seq, &mut grads);
        }
    }
    Ok((Some(grads), parts))
}

fn queries_neg_vec(negs: &[Vec<SeqState>], j: usize, k: usize) -> &[f64] {
    negs[j][k].z.row(0)
}

fn backprop_seq(params: &EncoderParams, seq: &SeqState, grads: &mut [f64]) {
    let cache = seq.cache.as_ref().expect("grad mode");
    let d_z = seq.d_z.as_ref().expect("grad mode");
    params.backward(&seq.tokens, cache, d_z, grads);
}
