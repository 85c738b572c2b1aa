//! Small transformer text encoder with analytic backpropagation.
//!
//! Architecture: token + learned position embeddings, then `blocks` of
//! {pre-layer-norm single-head scaled dot-product self-attention with
//! residual; pre-layer-norm two-layer GELU feed-forward with residual}.
//! No final layer norm, no dropout, no padding: each sequence runs at its
//! own length. Parameters live in one flat f64 buffer so the optimizer,
//! gradient checking, and serialization all see a plain array.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{gelu_prime, gelu_r, Real, RowMatrix};
use crate::rng::Rng;
use crate::text::UnitSpan;

pub const LN_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderHyper {
    pub vocab_size: usize,
    pub dim: usize,
    pub blocks: usize,
    pub max_len: usize,
}

impl EncoderHyper {
    pub fn hidden(&self) -> usize {
        4 * self.dim
    }

    fn per_block(&self) -> usize {
        let (d, h) = (self.dim, self.hidden());
        // ln1 scale/shift, four attention projections, ln2 scale/shift,
        // ff in (w1, b1), ff out (w2, b2)
        2 * d + 4 * d * d + 2 * d + d * h + h + h * d + d
    }

    pub fn param_count(&self) -> usize {
        (self.vocab_size + self.max_len) * self.dim + self.blocks * self.per_block()
    }

    fn tok_at(&self) -> usize {
        0
    }

    fn pos_at(&self) -> usize {
        self.vocab_size * self.dim
    }

    fn block_at(&self, k: usize) -> usize {
        (self.vocab_size + self.max_len) * self.dim + k * self.per_block()
    }
}

/// Offsets of one block's tensors inside the flat buffer.
#[derive(Debug, Clone, Copy)]
struct BlockAt {
    ln1_scale: usize,
    ln1_shift: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln2_scale: usize,
    ln2_shift: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl BlockAt {
    fn new(hyper: &EncoderHyper, k: usize) -> BlockAt {
        let (d, h) = (hyper.dim, hyper.hidden());
        let base = hyper.block_at(k);
        let ln1_scale = base;
        let ln1_shift = ln1_scale + d;
        let wq = ln1_shift + d;
        let wk = wq + d * d;
        let wv = wk + d * d;
        let wo = wv + d * d;
        let ln2_scale = wo + d * d;
        let ln2_shift = ln2_scale + d;
        let w1 = ln2_shift + d;
        let b1 = w1 + d * h;
        let w2 = b1 + h;
        let b2 = w2 + h * d;
        BlockAt {
            ln1_scale,
            ln1_shift,
            wq,
            wk,
            wv,
            wo,
            ln2_scale,
            ln2_shift,
            w1,
            b1,
            w2,
            b2,
        }
    }
}

/// All trainable tensors, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub hyper: EncoderHyper,
    pub data: Vec<f64>,
}

impl EncoderParams {
    /// Gaussian(0, 0.02) embeddings and projections, layer-norm scale 1 and
    /// shift 0, zero biases. Fully determined by the seed.
    pub fn init(hyper: EncoderHyper, seed: u64) -> EncoderParams {
        let mut data = vec![0.0; hyper.param_count()];
        let mut rng = Rng::derive(seed, 0x70617261);
        let d = hyper.dim;
        let h = hyper.hidden();
        let emb = (hyper.vocab_size + hyper.max_len) * d;
        for x in &mut data[..emb] {
            *x = INIT_STD * rng.next_gaussian();
        }
        for k in 0..hyper.blocks {
            let at = BlockAt::new(&hyper, k);
            for x in &mut data[at.wq..at.wq + 4 * d * d] {
                *x = INIT_STD * rng.next_gaussian();
            }
            for x in &mut data[at.w1..at.w1 + d * h] {
                *x = INIT_STD * rng.next_gaussian();
            }
            for x in &mut data[at.w2..at.w2 + h * d] {
                *x = INIT_STD * rng.next_gaussian();
            }
            for x in &mut data[at.ln1_scale..at.ln1_scale + d] {
                *x = 1.0;
            }
            for x in &mut data[at.ln2_scale..at.ln2_scale + d] {
                *x = 1.0;
            }
        }
        EncoderParams { hyper, data }
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.data.len()]
    }

    /// Hidden states Z for a token sequence (f64, no cache).
    pub fn forward(&self, tokens: &[u32]) -> Result<RowMatrix<f64>> {
        forward_impl(&self.hyper, &self.data, tokens, None)
    }

    /// Hidden states plus the activation cache needed by `backward`.
    pub fn forward_cached(&self, tokens: &[u32]) -> Result<(RowMatrix<f64>, ForwardCache)> {
        let mut cache = ForwardCache::default();
        let z = forward_impl(&self.hyper, &self.data, tokens, Some(&mut cache))?;
        Ok((z, cache))
    }

    /// Accumulate dL/dparams into `grads` given dL/dZ for one sequence.
    pub fn backward(
        &self,
        tokens: &[u32],
        cache: &ForwardCache,
        d_z: &RowMatrix<f64>,
        grads: &mut [f64],
    ) {
        backward_impl(&self.hyper, &self.data, tokens, cache, d_z, grads)
    }
}

/// Inference-time encoder at a chosen float width. Forward-only; outputs are
/// converted to f64 for everything downstream.
pub enum Inference {
    F64(EncoderParams),
    F32 { hyper: EncoderHyper, data: Vec<f32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Inference {
    pub fn new(params: &EncoderParams, precision: Precision) -> Inference {
        match precision {
            Precision::F64 => Inference::F64(params.clone()),
            Precision::F32 => Inference::F32 {
                hyper: params.hyper.clone(),
                data: params.data.iter().map(|&x| x as f32).collect(),
            },
        }
    }

    pub fn hyper(&self) -> &EncoderHyper {
        match self {
            Inference::F64(p) => &p.hyper,
            Inference::F32 { hyper, .. } => hyper,
        }
    }

    pub fn hidden_states(&self, tokens: &[u32]) -> Result<RowMatrix<f64>> {
        match self {
            Inference::F64(p) => p.forward(tokens),
            Inference::F32 { hyper, data } => {
                Ok(forward_impl::<f32>(hyper, data, tokens, None)?.to_f64())
            }
        }
    }

    /// The [CLS]-position representation.
    pub fn text_repr(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        let z = self.hidden_states(tokens)?;
        Ok(z.row(0).to_vec())
    }
}

/// Row 0 of Z: the [CLS] text representation.
pub fn text_representation(z: &RowMatrix<f64>) -> &[f64] {
    z.row(0)
}

/// e_i = mean of Z rows over each unit's token span.
pub fn unit_embeddings(z: &RowMatrix<f64>, spans: &[UnitSpan]) -> Result<RowMatrix<f64>> {
    let mut out = RowMatrix::zeros(spans.len(), z.cols);
    for (i, span) in spans.iter().enumerate() {
        if span.tok_start >= span.tok_end || span.tok_end > z.rows {
            return Err(Error::BadSpan {
                tok_start: span.tok_start,
                tok_end: span.tok_end,
                len: z.rows,
            });
        }
        let inv = 1.0 / span.token_count() as f64;
        let row = out.row_mut(i);
        for t in span.tok_start..span.tok_end {
            let src = &z.data[t * z.cols..(t + 1) * z.cols];
            for (o, &s) in row.iter_mut().zip(src) {
                *o += s * inv;
            }
        }
    }
    Ok(out)
}

/// m = GELU(t_q elementwise* t_p), exact Gaussian-CDF GELU.
pub fn matching_representation(t_q: &[f64], t_p: &[f64]) -> Result<Vec<f64>> {
    if t_q.len() != t_p.len() {
        return Err(Error::DimensionMismatch {
            left: t_q.len(),
            right: t_p.len(),
        });
    }
    Ok(t_q
        .iter()
        .zip(t_p)
        .map(|(&a, &b)| crate::math::gelu(a * b))
        .collect())
}

/// Activations recorded by `forward_cached` for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    len: usize,
    blocks: Vec<BlockCache>,
}

#[derive(Debug, Clone, Default)]
struct BlockCache {
    ln1_out: Vec<f64>,
    ln1_xhat: Vec<f64>,
    ln1_inv_std: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    ln2_out: Vec<f64>,
    ln2_xhat: Vec<f64>,
    ln2_inv_std: Vec<f64>,
    ff_pre: Vec<f64>,
    ff_act: Vec<f64>,
}

/// out(m x n) = a(m x k) * b(k x n)
fn matmul<R: Real>(a: &[R], m: usize, kk: usize, b: &[R], n: usize, out: &mut [R]) {
    debug_assert_eq!(a.len(), m * kk);
    debug_assert_eq!(b.len(), kk * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for o in out_row.iter_mut() {
            *o = R::ZERO;
        }
        for k in 0..kk {
            let aik = a[i * kk + k];
            let b_row = &b[k * n..(k + 1) * n];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
}

/// out(m x n) = a(m x k) * b(n x k)^T
fn matmul_bt(a: &[f64], m: usize, kk: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * kk);
    debug_assert_eq!(b.len(), n * kk);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * kk..(i + 1) * kk];
        for j in 0..n {
            let b_row = &b[j * kk..(j + 1) * kk];
            let mut acc = 0.0;
            for k in 0..kk {
                acc += a_row[k] * b_row[k];
            }
            out[i * n + j] = acc;
        }
    }
}

/// out(k x n) += a(m x k)^T * b(m x n)
fn matmul_at_b_acc(a: &[f64], m: usize, kk: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * kk);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), kk * n);
    for i in 0..m {
        let a_row = &a[i * kk..(i + 1) * kk];
        let b_row = &b[i * n..(i + 1) * n];
        for (k, &aik) in a_row.iter().enumerate() {
            let out_row = &mut out[k * n..(k + 1) * n];
            for (o, &bij) in out_row.iter_mut().zip(b_row) {
                *o += aik * bij;
            }
        }
    }
}

fn layer_norm<R: Real>(
    x: &[R],
    rows: usize,
    dim: usize,
    scale: &[R],
    shift: &[R],
    out: &mut [R],
    mut stash: Option<(&mut Vec<R>, &mut Vec<R>)>,
) {
    let inv_d = R::from_f64(1.0 / dim as f64);
    let eps = R::from_f64(LN_EPS);
    for r in 0..rows {
        let row = &x[r * dim..(r + 1) * dim];
        let mut mean = R::ZERO;
        for &v in row {
            mean += v;
        }
        mean = mean * inv_d;
        let mut var = R::ZERO;
        for &v in row {
            let d = v - mean;
            var += d * d;
        }
        var = var * inv_d;
        let inv_std = R::ONE / (var + eps).sqrt();
        let out_row = &mut out[r * dim..(r + 1) * dim];
        for j in 0..dim {
            let xhat = (row[j] - mean) * inv_std;
            out_row[j] = scale[j] * xhat + shift[j];
            if let Some((xh, _)) = stash.as_mut() {
                xh.push(xhat);
            }
        }
        if let Some((_, istd)) = stash.as_mut() {
            istd.push(inv_std);
        }
    }
}

fn softmax_rows<R: Real>(s: &mut [R], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &mut s[r * cols..(r + 1) * cols];
        let mut max = row[0];
        for &v in row.iter() {
            if v > max {
                max = v;
            }
        }
        let mut sum = R::ZERO;
        for v in row.iter_mut() {
            let e = (*v - max).exp();
            *v = e;
            sum += e;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

fn forward_impl<R: Real>(
    hyper: &EncoderHyper,
    data: &[R],
    tokens: &[u32],
    mut cache: Option<&mut ForwardCache>,
) -> Result<RowMatrix<R>> {
    let len = tokens.len();
    let d = hyper.dim;
    let h = hyper.hidden();
    if len == 0 {
        return Err(Error::EmptyBatch);
    }
    if len > hyper.max_len {
        return Err(Error::SequenceTooLong {
            len,
            max_len: hyper.max_len,
        });
    }
    for &t in tokens {
        if t as usize >= hyper.vocab_size {
            return Err(Error::TokenOutOfRange {
                token: t,
                vocab_size: hyper.vocab_size,
            });
        }
    }

    // token + position embeddings
    let mut x = vec![R::ZERO; len * d];
    for (pos, &t) in tokens.iter().enumerate() {
        let tok = &data[hyper.tok_at() + t as usize * d..hyper.tok_at() + (t as usize + 1) * d];
        let pe = &data[hyper.pos_at() + pos * d..hyper.pos_at() + (pos + 1) * d];
        let row = &mut x[pos * d..(pos + 1) * d];
        for j in 0..d {
            row[j] = tok[j] + pe[j];
        }
    }
    if let Some(c) = cache.as_mut() {
        c.len = len;
        c.blocks.clear();
    }

    let scale = R::from_f64(1.0 / libm::sqrt(d as f64));
    let mut y = vec![R::ZERO; len * d];
    let mut q = vec![R::ZERO; len * d];
    let mut k = vec![R::ZERO; len * d];
    let mut v = vec![R::ZERO; len * d];
    let mut s = vec![R::ZERO; len * len];
    let mut ctx = vec![R::ZERO; len * d];
    let mut att = vec![R::ZERO; len * d];
    let mut y2 = vec![R::ZERO; len * d];
    let mut u = vec![R::ZERO; len * h];
    let mut g = vec![R::ZERO; len * h];
    let mut f = vec![R::ZERO; len * d];

    for blk in 0..hyper.blocks {
        let at = BlockAt::new(hyper, blk);
        let want = cache.is_some();
        let mut xhat1 = Vec::new();
        let mut istd1 = Vec::new();
        layer_norm(
            &x,
            len,
            d,
            &data[at.ln1_scale..at.ln1_scale + d],
            &data[at.ln1_shift..at.ln1_shift + d],
            &mut y,
            if want {
                Some((&mut xhat1, &mut istd1))
            } else {
                None
            },
        );
        matmul(&y, len, d, &data[at.wq..at.wq + d * d], d, &mut q);
        matmul(&y, len, d, &data[at.wk..at.wk + d * d], d, &mut k);
        matmul(&y, len, d, &data[at.wv..at.wv + d * d], d, &mut v);
        // s = q k^T / sqrt(d)
        for i in 0..len {
            let qi = &q[i * d..(i + 1) * d];
            for j in 0..len {
                let kj = &k[j * d..(j + 1) * d];
                let mut acc = R::ZERO;
                for t in 0..d {
                    acc += qi[t] * kj[t];
                }
                s[i * len + j] = acc * scale;
            }
        }
        softmax_rows(&mut s, len, len);
        matmul(&s, len, len, &v, d, &mut ctx);
        matmul(&ctx, len, d, &data[at.wo..at.wo + d * d], d, &mut att);
        for (xi, &ai) in x.iter_mut().zip(att.iter()) {
            *xi += ai;
        }

        let mut xhat2 = Vec::new();
        let mut istd2 = Vec::new();
        layer_norm(
            &x,
            len,
            d,
            &data[at.ln2_scale..at.ln2_scale + d],
            &data[at.ln2_shift..at.ln2_shift + d],
            &mut y2,
            if want {
                Some((&mut xhat2, &mut istd2))
            } else {
                None
            },
        );
        matmul(&y2, len, d, &data[at.w1..at.w1 + d * h], h, &mut u);
        for r in 0..len {
            let b1 = &data[at.b1..at.b1 + h];
            let row = &mut u[r * h..(r + 1) * h];
            for j in 0..h {
                row[j] += b1[j];
            }
        }
        for (gi, &ui) in g.iter_mut().zip(u.iter()) {
            *gi = gelu_r(ui);
        }
        matmul(&g, len, h, &data[at.w2..at.w2 + h * d], d, &mut f);
        for r in 0..len {
            let b2 = &data[at.b2..at.b2 + d];
            let row = &mut f[r * d..(r + 1) * d];
            for j in 0..d {
                row[j] += b2[j];
            }
        }
        for (xi, &fi) in x.iter_mut().zip(f.iter()) {
            *xi += fi;
        }

        if let Some(c) = cache.as_mut() {
            c.blocks.push(BlockCache {
                ln1_out: to_f64_vec(&y),
                ln1_xhat: to_f64_vec(&xhat1),
                ln1_inv_std: to_f64_vec(&istd1),
                q: to_f64_vec(&q),
                k: to_f64_vec(&k),
                v: to_f64_vec(&v),
                probs: to_f64_vec(&s),
                ctx: to_f64_vec(&ctx),
                ln2_out: to_f64_vec(&y2),
                ln2_xhat: to_f64_vec(&xhat2),
                ln2_inv_std: to_f64_vec(&istd2),
                ff_pre: to_f64_vec(&u),
                ff_act: to_f64_vec(&g),
            });
        }
    }

    Ok(RowMatrix {
        rows: len,
        cols: d,
        data: x,
    })
}

fn to_f64_vec<R: Real>(xs: &[R]) -> Vec<f64> {
    xs.iter().map(|x| x.to_f64()).collect()
}

/// dL/dx for one layer norm, accumulating scale/shift grads.
#[allow(clippy::too_many_arguments)]
fn layer_norm_backward(
    d_out: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    scale: &[f64],
    rows: usize,
    dim: usize,
    d_x: &mut [f64],
    d_scale: &mut [f64],
    d_shift: &mut [f64],
) {
    let inv_d = 1.0 / dim as f64;
    for r in 0..rows {
        let dy = &d_out[r * dim..(r + 1) * dim];
        let xh = &xhat[r * dim..(r + 1) * dim];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..dim {
            d_scale[j] += dy[j] * xh[j];
            d_shift[j] += dy[j];
            let dxh = dy[j] * scale[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let istd = inv_std[r];
        let dx = &mut d_x[r * dim..(r + 1) * dim];
        for j in 0..dim {
            let dxh = dy[j] * scale[j];
            dx[j] += istd * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
}

fn backward_impl(
    hyper: &EncoderHyper,
    data: &[f64],
    tokens: &[u32],
    cache: &ForwardCache,
    d_z: &RowMatrix<f64>,
    grads: &mut [f64],
) {
    let len = cache.len;
    let d = hyper.dim;
    let h = hyper.hidden();
    debug_assert_eq!(d_z.rows, len);
    debug_assert_eq!(d_z.cols, d);
    debug_assert_eq!(grads.len(), hyper.param_count());
    let scale = 1.0 / libm::sqrt(d as f64);

    let mut d_x = d_z.data.clone();
    let mut d_g = vec![0.0; len * h];
    let mut d_u = vec![0.0; len * h];
    let mut d_y2 = vec![0.0; len * d];
    let mut d_att = vec![0.0; len * d];
    let mut d_ctx = vec![0.0; len * d];
    let mut d_p = vec![0.0; len * len];
    let mut d_s = vec![0.0; len * len];
    let mut d_q = vec![0.0; len * d];
    let mut d_k = vec![0.0; len * d];
    let mut d_v = vec![0.0; len * d];
    let mut d_y = vec![0.0; len * d];

    for blk in (0..hyper.blocks).rev() {
        let at = BlockAt::new(hyper, blk);
        let c = &cache.blocks[blk];

        // x_out = h_res + f;  d_h accumulates in d_x, d_f = d_x
        matmul_bt(&d_x, len, d, &data[at.w2..at.w2 + h * d], h, &mut d_g);
        matmul_at_b_acc(&c.ff_act, len, h, &d_x, d, &mut grads[at.w2..at.w2 + h * d]);
        for r in 0..len {
            for j in 0..d {
                grads[at.b2 + j] += d_x[r * d + j];
            }
        }
        for i in 0..len * h {
            d_u[i] = d_g[i] * gelu_prime(c.ff_pre[i]);
        }
        matmul_at_b_acc(
            &c.ln2_out,
            len,
            d,
            &d_u,
            h,
            &mut grads[at.w1..at.w1 + d * h],
        );
        for r in 0..len {
            for j in 0..h {
                grads[at.b1 + j] += d_u[r * h + j];
            }
        }
        matmul_bt(&d_u, len, h, &data[at.w1..at.w1 + d * h], d, &mut d_y2);
        // d_x already holds the residual path gradient into h_res
        {
            let (gs, rest) = grads[at.ln2_scale..].split_at_mut(d);
            layer_norm_backward(
                &d_y2,
                &c.ln2_xhat,
                &c.ln2_inv_std,
                &data[at.ln2_scale..at.ln2_scale + d],
                len,
                d,
                &mut d_x,
                gs,
                &mut rest[..d],
            );
        }

        // h_res = x_in + att
        d_att.copy_from_slice(&d_x);
        matmul_bt(&d_att, len, d, &data[at.wo..at.wo + d * d], d, &mut d_ctx);
        matmul_at_b_acc(&c.ctx, len, d, &d_att, d, &mut grads[at.wo..at.wo + d * d]);
        // ctx = p v
        matmul_bt(&d_ctx, len, d, &c.v, len, &mut d_p);
        matmul_at_b_acc2(&c.probs, len, len, &d_ctx, d, &mut d_v);
        // softmax rows backward
        for i in 0..len {
            let p_row = &c.probs[i * len..(i + 1) * len];
            let dp_row = &d_p[i * len..(i + 1) * len];
            let mut inner = 0.0;
            for j in 0..len {
                inner += dp_row[j] * p_row[j];
            }
            for j in 0..len {
                d_s[i * len + j] = p_row[j] * (dp_row[j] - inner);
            }
        }
        // s = q k^T * scale
        matmul(&d_s, len, len, &c.k, d, &mut d_q);
        for x in d_q.iter_mut() {
            *x *= scale;
        }
        // d_k = d_s^T q * scale
        for j in 0..len {
            let dk = &mut d_k[j * d..(j + 1) * d];
            for t in dk.iter_mut() {
                *t = 0.0;
            }
            for i in 0..len {
                let w = d_s[i * len + j] * scale;
                let qi = &c.q[i * d..(i + 1) * d];
                for t in 0..d {
                    dk[t] += w * qi[t];
                }
            }
        }
        matmul_at_b_acc(
            &c.ln1_out,
            len,
            d,
            &d_q,
            d,
            &mut grads[at.wq..at.wq + d * d],
        );
        matmul_at_b_acc(
            &c.ln1_out,
            len,
            d,
            &d_k,
            d,
            &mut grads[at.wk..at.wk + d * d],
        );
        matmul_at_b_acc(
            &c.ln1_out,
            len,
            d,
            &d_v,
            d,
            &mut grads[at.wv..at.wv + d * d],
        );
        matmul_bt(&d_q, len, d, &data[at.wq..at.wq + d * d], d, &mut d_y);
        {
            let mut tmp = vec![0.0; len * d];
            matmul_bt(&d_k, len, d, &data[at.wk..at.wk + d * d], d, &mut tmp);
            for (a, b) in d_y.iter_mut().zip(&tmp) {
                *a += b;
            }
            matmul_bt(&d_v, len, d, &data[at.wv..at.wv + d * d], d, &mut tmp);
            for (a, b) in d_y.iter_mut().zip(&tmp) {
                *a += b;
            }
        }
        {
            let (gs, rest) = grads[at.ln1_scale..].split_at_mut(d);
            layer_norm_backward(
                &d_y,
                &c.ln1_xhat,
                &c.ln1_inv_std,
                &data[at.ln1_scale..at.ln1_scale + d],
                len,
                d,
                &mut d_x,
                gs,
                &mut rest[..d],
            );
        }
    }

    // embeddings
    for (pos, &t) in tokens.iter().enumerate() {
        let row = &d_x[pos * d..(pos + 1) * d];
        let tok = hyper.tok_at() + t as usize * d;
        let pe = hyper.pos_at() + pos * d;
        for j in 0..d {
            grads[tok + j] += row[j];
            grads[pe + j] += row[j];
        }
    }
}

/// out(k x n) = a(m x k)^T * b(m x n), overwriting out.
fn matmul_at_b_acc2(a: &[f64], m: usize, kk: usize, b: &[f64], n: usize, out: &mut [f64]) {
    for o in out.iter_mut() {
        *o = 0.0;
    }
    matmul_at_b_acc(a, m, kk, b, n, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::dot;

    fn tiny() -> EncoderHyper {
        EncoderHyper {
            vocab_size: 12,
            dim: 8,
            blocks: 2,
            max_len: 16,
        }
    }

    #[test]
    fn forward_shape_contract() {
        let params = EncoderParams::init(tiny(), 1);
        let z = params.forward(&[0, 3, 5]).unwrap();
        assert_eq!((z.rows, z.cols), (3, 8));
        assert!(z.data.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_weights_pass_embeddings_through() {
        let hyper = tiny();
        let mut params = EncoderParams::init(hyper.clone(), 1);
        for k in 0..hyper.blocks {
            let at = BlockAt::new(&hyper, k);
            let d = hyper.dim;
            let h = hyper.hidden();
            for x in &mut params.data[at.wq..at.wq + 4 * d * d] {
                *x = 0.0;
            }
            for x in &mut params.data[at.w1..at.w1 + d * h + h] {
                *x = 0.0;
            }
            for x in &mut params.data[at.w2..at.w2 + h * d + d] {
                *x = 0.0;
            }
        }
        let tokens = [0u32, 4, 7];
        let z = params.forward(&tokens).unwrap();
        let d = hyper.dim;
        for (pos, &t) in tokens.iter().enumerate() {
            for j in 0..d {
                let tok = params.data[hyper.tok_at() + t as usize * d + j];
                let pe = params.data[hyper.pos_at() + pos * d + j];
                assert!((z.data[pos * d + j] - (tok + pe)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let params = EncoderParams::init(tiny(), 9);
        let a = params.forward(&[0, 2, 9, 1]).unwrap();
        let b = params.forward(&[0, 2, 9, 1]).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn out_of_range_token_rejected() {
        let params = EncoderParams::init(tiny(), 1);
        assert!(matches!(
            params.forward(&[0, 99]).unwrap_err(),
            Error::TokenOutOfRange { .. }
        ));
    }

    #[test]
    fn swapping_tokens_changes_hidden_states() {
        let params = EncoderParams::init(tiny(), 2);
        let a = params.forward(&[0, 3, 4]).unwrap();
        let b = params.forward(&[0, 4, 3]).unwrap();
        assert_ne!(a.data, b.data);
    }

    #[test]
    fn text_representation_is_row_zero() {
        let params = EncoderParams::init(tiny(), 3);
        let z = params.forward(&[0, 5, 6]).unwrap();
        assert_eq!(text_representation(&z), z.row(0));
    }

    #[test]
    fn unit_embedding_examples() {
        // single-token span returns that row; equal rows average to themselves
        let z = RowMatrix {
            rows: 3,
            cols: 2,
            data: vec![9.0, 9.0, 1.0, 0.0, 0.0, 1.0],
        };
        let spans = [
            UnitSpan {
                index: 0,
                char_start: 0,
                char_end: 0,
                tok_start: 1,
                tok_end: 2,
            },
            UnitSpan {
                index: 1,
                char_start: 0,
                char_end: 0,
                tok_start: 1,
                tok_end: 3,
            },
        ];
        let e = unit_embeddings(&z, &spans).unwrap();
        assert_eq!(e.row(0), &[1.0, 0.0]);
        assert_eq!(e.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn unit_embedding_rejects_bad_span() {
        let z = RowMatrix::<f64>::zeros(2, 2);
        let bad = [UnitSpan {
            index: 0,
            char_start: 0,
            char_end: 0,
            tok_start: 1,
            tok_end: 1,
        }];
        assert!(matches!(
            unit_embeddings(&z, &bad).unwrap_err(),
            Error::BadSpan { .. }
        ));
    }

    #[test]
    fn matching_representation_examples() {
        let zeros = vec![0.0; 4];
        let other = vec![1.0, -2.0, 0.5, 3.0];
        assert_eq!(
            matching_representation(&zeros, &other).unwrap(),
            vec![0.0; 4]
        );
        let ones = vec![1.0; 3];
        let m = matching_representation(&ones, &ones).unwrap();
        for &v in &m {
            assert!((v - 0.8413447460685429).abs() < 1e-12);
        }
        assert!(matching_representation(&ones, &zeros).is_err());
    }

    #[test]
    fn elementwise_product_sums_to_dot() {
        let mut rng = Rng::seed(77);
        for _ in 0..100 {
            let a: Vec<f64> = (0..16).map(|_| rng.next_gaussian()).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.next_gaussian()).collect();
            let sum: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((sum - dot(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_inference_tracks_f64() {
        let params = EncoderParams::init(tiny(), 4);
        let inf32 = Inference::new(&params, Precision::F32);
        let inf64 = Inference::new(&params, Precision::F64);
        let a = inf32.text_repr(&[0, 2, 3]).unwrap();
        let b = inf64.text_repr(&[0, 2, 3]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-4, "{x} vs {y}");
        }
    }

    // With at least one attention block, the [CLS] representation must see
    // every position: its gradient w.r.t. each input token's embedding is
    // nonzero.
    #[test]
    fn cls_gradient_reaches_every_token() {
        let hyper = tiny();
        let params = EncoderParams::init(hyper.clone(), 8);
        let tokens = [0u32, 3, 7, 11];
        let (z, cache) = params.forward_cached(&tokens).unwrap();
        let mut d_z = RowMatrix::zeros(z.rows, z.cols);
        for v in d_z.row_mut(0) {
            *v = 1.0;
        }
        let mut grads = params.zeros_like();
        params.backward(&tokens, &cache, &d_z, &mut grads);
        let d = hyper.dim;
        for &t in &tokens[1..] {
            let row =
                &grads[hyper.tok_at() + t as usize * d..hyper.tok_at() + (t as usize + 1) * d];
            let norm: f64 = row.iter().map(|x| x * x).sum();
            assert!(norm > 0.0, "token {t} does not influence [CLS]");
        }
    }

    // Finite-difference check of the raw encoder backward: d sum(Z)/d theta.
    #[test]
    fn backward_matches_finite_differences() {
        let hyper = EncoderHyper {
            vocab_size: 6,
            dim: 4,
            blocks: 2,
            max_len: 8,
        };
        let params = EncoderParams::init(hyper.clone(), 5);
        let tokens = [0u32, 2, 3, 5];
        let (z, cache) = params.forward_cached(&tokens).unwrap();
        let d_z = RowMatrix {
            rows: z.rows,
            cols: z.cols,
            data: vec![1.0; z.rows * z.cols],
        };
        let mut grads = params.zeros_like();
        params.backward(&tokens, &cache, &d_z, &mut grads);

        let mut rng = Rng::seed(123);
        let hstep = 1e-5;
        for _ in 0..60 {
            let i = rng.next_range(params.data.len());
            let mut plus = params.clone();
            plus.data[i] += hstep;
            let mut minus = params.clone();
            minus.data[i] -= hstep;
            let f_plus: f64 = plus.forward(&tokens).unwrap().data.iter().sum();
            let f_minus: f64 = minus.forward(&tokens).unwrap().data.iter().sum();
            let fd = (f_plus - f_minus) / (2.0 * hstep);
            let denom = grads[i].abs().max(fd.abs()).max(1e-6);
            assert!(
                (grads[i] - fd).abs() / denom < 1e-4,
                "coord {i}: analytic {} vs fd {fd}",
                grads[i]
            );
        }
    }
}
