//! Scalar and small-vector numerics shared across the crate.

use alloc::vec;
use alloc::vec::Vec;

pub const PI: f64 = core::f64::consts::PI;

/// Float abstraction so the encoder forward pass can run in f32 for
/// inference while training stays in f64. Transcendentals go through libm
/// for identical results on every platform.
pub trait Real:
    Copy
    + PartialOrd
    + core::ops::Add<Output = Self>
    + core::ops::Sub<Output = Self>
    + core::ops::Mul<Output = Self>
    + core::ops::Div<Output = Self>
    + core::ops::Neg<Output = Self>
    + core::ops::AddAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn erf(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Real for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
    fn from_f64(x: f64) -> f64 {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    fn erf(self) -> f64 {
        libm::erf(self)
    }
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Real for f32 {
    const ZERO: f32 = 0.0;
    const ONE: f32 = 1.0;
    fn from_f64(x: f64) -> f32 {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> f32 {
        libm::expf(self)
    }
    fn erf(self) -> f32 {
        libm::erff(self)
    }
    fn sqrt(self) -> f32 {
        libm::sqrtf(self)
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Standard normal PDF.
pub fn norm_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Exact GELU, x * Phi(x).
pub fn gelu(x: f64) -> f64 {
    x * norm_cdf(x)
}

/// d/dx GELU = Phi(x) + x phi(x).
pub fn gelu_prime(x: f64) -> f64 {
    norm_cdf(x) + x * norm_pdf(x)
}

/// Generic GELU used by the precision-switchable forward pass.
pub fn gelu_r<R: Real>(x: R) -> R {
    let half = R::from_f64(0.5);
    let inv_sqrt2 = R::from_f64(1.0 / core::f64::consts::SQRT_2);
    x * half * (R::ONE + (x * inv_sqrt2).erf())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

pub fn powi2(rel: u32) -> f64 {
    libm::exp2(rel as f64)
}

/// Numerically stable softmax (max-logit subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let mut max = f64::NEG_INFINITY;
    for &x in logits {
        if x > max {
            max = x;
        }
    }
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        let e = libm::exp(x - max);
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// log(sum_i exp(x_i)) with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in logits {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for &x in logits {
        sum += libm::exp(x - max);
    }
    max + libm::log(sum)
}

/// Index of the maximum, ties broken by the lowest index.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Dense row-major matrix of `rows` x `cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix<R = f64> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<R>,
}

impl<R: Real> RowMatrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMatrix {
            rows,
            cols,
            data: vec![R::ZERO; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_f64(&self) -> RowMatrix<f64> {
        RowMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_f64()).collect(),
        }
    }
}
