//! Representation diagnostics: how evenly a passage representation covers
//! its units, how often the matching representation picks the annotated
//! essential unit, and how orthogonal the unit embeddings are.

use alloc::vec::Vec;

use crate::encoder::{matching_representation, unit_embeddings, EncoderParams};
use crate::error::{Error, Result};
use crate::math::{argmax_lowest, dot, softmax, RowMatrix};
use crate::objective::PairExample;

/// Population variance of softmax(dot(t_p, e_i)); the same normalization the
/// balance loss uses, so the diagnostic measures the trained object. `None`
/// for passages with a single unit, where balance is undefined.
pub fn similarity_variance(t_p: &[f64], units: &RowMatrix<f64>) -> Option<f64> {
    let n = units.rows;
    if n < 2 {
        return None;
    }
    let logits: Vec<f64> = (0..n).map(|i| dot(t_p, units.row(i))).collect();
    let probs = softmax(&logits);
    let mean = 1.0 / n as f64; // softmax sums to one
    let var = probs.iter().map(|&p| (p - mean) * (p - mean)).sum::<f64>() / n as f64;
    Some(var)
}

/// argmax_i dot(m, e_i), ties to the lowest index — the same decision rule
/// the extraction loss trains.
pub fn predict_essential_unit(m: &[f64], units: &RowMatrix<f64>) -> usize {
    let logits: Vec<f64> = (0..units.rows).map(|i| dot(m, units.row(i))).collect();
    argmax_lowest(&logits)
}

/// Mean pairwise |cos(e_i, e_j)| over unit pairs, plus the number of
/// zero-norm embeddings that had to be excluded. `None` when fewer than two
/// usable units remain.
pub fn pairwise_abs_cosine(units: &RowMatrix<f64>) -> (Option<f64>, usize) {
    let mut rows: Vec<(usize, f64)> = Vec::new();
    let mut excluded = 0usize;
    for i in 0..units.rows {
        let norm = libm::sqrt(dot(units.row(i), units.row(i)));
        if norm == 0.0 {
            excluded += 1;
        } else {
            rows.push((i, norm));
        }
    }
    if rows.len() < 2 {
        return (None, excluded);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            let (i, ni) = rows[a];
            let (j, nj) = rows[b];
            sum += libm::fabs(dot(units.row(i), units.row(j))) / (ni * nj);
            count += 1;
        }
    }
    (Some(sum / count as f64), excluded)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDiagnostics {
    pub unit_count: usize,
    pub variance: Option<f64>,
    pub predicted: usize,
    pub label: usize,
    pub dispersion: Option<f64>,
    pub zero_norm_units: usize,
}

/// One forward pass over the pair, feeding all three diagnostics.
pub fn pair_diagnostics(params: &EncoderParams, pair: &PairExample) -> Result<PairDiagnostics> {
    pair.validate()?;
    let z_p = params.forward(&pair.passage)?;
    let t_p = z_p.row(0).to_vec();
    let units = unit_embeddings(&z_p, &pair.units)?;
    let z_q = params.forward(&pair.query)?;
    let m = matching_representation(z_q.row(0), &t_p)?;
    let (dispersion, zero_norm_units) = pairwise_abs_cosine(&units);
    Ok(PairDiagnostics {
        unit_count: units.rows,
        variance: similarity_variance(&t_p, &units),
        predicted: predict_essential_unit(&m, &units),
        label: pair.label,
        dispersion,
        zero_norm_units,
    })
}

/// Mean similarity variance over pairs whose passage has n >= 2 units.
pub fn unit_balance_variance(params: &EncoderParams, pairs: &[PairExample]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for pair in pairs {
        if let Some(var) = pair_diagnostics(params, pair)?.variance {
            sum += var;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptySample);
    }
    Ok(sum / count as f64)
}

/// Fraction of pairs where the matching representation's argmax unit equals
/// the annotated label.
pub fn emu_accuracy(params: &EncoderParams, pairs: &[PairExample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut hits = 0usize;
    for pair in pairs {
        let d = pair_diagnostics(params, pair)?;
        if d.predicted == d.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Mean pairwise |cosine| among unit embeddings, averaged over passages with
/// at least two nonzero-norm units. Also returns how many zero-norm unit
/// embeddings were excluded.
pub fn unit_dispersion(params: &EncoderParams, pairs: &[PairExample]) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut excluded = 0usize;
    for pair in pairs {
        let d = pair_diagnostics(params, pair)?;
        excluded += d.zero_norm_units;
        if let Some(cos) = d.dispersion {
            sum += cos;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptySample);
    }
    Ok((sum / count as f64, excluded))
}

/// All three diagnostics in one pass over the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsReport {
    pub balance_variance: f64,
    pub emu_accuracy: f64,
    pub unit_dispersion: f64,
    /// Pairs scored for accuracy.
    pub pairs: usize,
    /// Pairs entering the variance mean (n >= 2).
    pub variance_pairs: usize,
    /// Passages entering the dispersion mean.
    pub dispersion_pairs: usize,
    pub zero_norm_units: usize,
}

pub fn diagnostics(params: &EncoderParams, pairs: &[PairExample]) -> Result<DiagnosticsReport> {
    let per_pair: Vec<PairDiagnostics> = pairs
        .iter()
        .map(|pair| pair_diagnostics(params, pair))
        .collect::<Result<_>>()?;
    aggregate(&per_pair)
}

/// Combine per-pair diagnostics into the report. Split out so callers can
/// compute `pair_diagnostics` in parallel and still aggregate identically.
pub fn aggregate(per_pair: &[PairDiagnostics]) -> Result<DiagnosticsReport> {
    if per_pair.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut var_sum = 0.0;
    let mut var_count = 0usize;
    let mut hits = 0usize;
    let mut cos_sum = 0.0;
    let mut cos_count = 0usize;
    let mut excluded = 0usize;
    for d in per_pair {
        if let Some(v) = d.variance {
            var_sum += v;
            var_count += 1;
        }
        if d.predicted == d.label {
            hits += 1;
        }
        if let Some(c) = d.dispersion {
            cos_sum += c;
            cos_count += 1;
        }
        excluded += d.zero_norm_units;
    }
    if var_count == 0 {
        return Err(Error::EmptySample);
    }
    Ok(DiagnosticsReport {
        balance_variance: var_sum / var_count as f64,
        emu_accuracy: hits as f64 / per_pair.len() as f64,
        unit_dispersion: if cos_count == 0 {
            0.0
        } else {
            cos_sum / cos_count as f64
        },
        pairs: per_pair.len(),
        variance_pairs: var_count,
        dispersion_pairs: cos_count,
        zero_norm_units: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderHyper;
    use crate::text::UnitSpan;
    use alloc::format;
    use alloc::vec;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> RowMatrix<f64> {
        RowMatrix {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    #[test]
    fn variance_zero_for_equal_logits() {
        let e = mat(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let v = similarity_variance(&[0.5, -0.5], &e).unwrap();
        assert!(v < 1e-18);
    }

    #[test]
    fn variance_frozen_example() {
        // logits [0, ln 3] -> probs [0.25, 0.75] -> population variance 0.0625
        let e = mat(2, 1, &[0.0, libm::log(3.0)]);
        let v = similarity_variance(&[1.0], &e).unwrap();
        assert!((v - 0.0625).abs() < 1e-12, "{v}");
    }

    #[test]
    fn variance_undefined_for_single_unit() {
        let e = mat(1, 1, &[2.0]);
        assert_eq!(similarity_variance(&[1.0], &e), None);
    }

    #[test]
    fn variance_invariant_under_unit_permutation() {
        let e = mat(3, 2, &[1.0, 0.5, -0.3, 0.2, 0.8, -0.1]);
        let permuted = mat(3, 2, &[0.8, -0.1, 1.0, 0.5, -0.3, 0.2]);
        let t_p = [0.7, -1.1];
        let a = similarity_variance(&t_p, &e).unwrap();
        let b = similarity_variance(&t_p, &permuted).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn dispersion_frozen_examples() {
        let identical = mat(2, 2, &[3.0, 4.0, 3.0, 4.0]);
        assert!((pairwise_abs_cosine(&identical).0.unwrap() - 1.0).abs() < 1e-12);
        let orthogonal = mat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(pairwise_abs_cosine(&orthogonal).0.unwrap(), 0.0);
        let s = 1.0 / libm::sqrt(2.0);
        let angled = mat(2, 2, &[1.0, 0.0, s, s]);
        let got = pairwise_abs_cosine(&angled).0.unwrap();
        assert!((got - s).abs() < 1e-12, "{got}");
    }

    #[test]
    fn dispersion_excludes_zero_norm_units() {
        let e = mat(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let (cos, excluded) = pairwise_abs_cosine(&e);
        assert_eq!(excluded, 1);
        assert_eq!(cos.unwrap(), 0.0);
        let lone = mat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (cos, excluded) = pairwise_abs_cosine(&lone);
        assert_eq!((cos, excluded), (None, 1));
    }

    fn toy_pairs(count: usize) -> Vec<PairExample> {
        (0..count)
            .map(|i| {
                let a = 2 + (i % 6) as u32;
                let b = 2 + ((i + 3) % 6) as u32;
                PairExample {
                    query_id: format!("q{i}"),
                    passage_id: format!("d{i}"),
                    query: vec![0, a],
                    passage: vec![0, a, a, b, b],
                    units: vec![
                        UnitSpan {
                            index: 0,
                            char_start: 0,
                            char_end: 0,
                            tok_start: 1,
                            tok_end: 3,
                        },
                        UnitSpan {
                            index: 1,
                            char_start: 0,
                            char_end: 0,
                            tok_start: 3,
                            tok_end: 5,
                        },
                    ],
                    label: 0,
                    negatives: vec![],
                }
            })
            .collect()
    }

    fn toy_params() -> EncoderParams {
        EncoderParams::init(
            EncoderHyper {
                vocab_size: 8,
                dim: 6,
                blocks: 1,
                max_len: 12,
            },
            21,
        )
    }

    #[test]
    fn diagnostics_are_pure_functions() {
        let params = toy_params();
        let pairs = toy_pairs(5);
        let a = diagnostics(&params, &pairs).unwrap();
        let b = diagnostics(&params, &pairs).unwrap();
        assert_eq!(a, b);
        assert!(a.balance_variance >= 0.0);
        assert!((0.0..=1.0).contains(&a.emu_accuracy));
        assert!((0.0..=1.0).contains(&a.unit_dispersion));
    }

    #[test]
    fn emu_accuracy_self_consistent_with_predictions() {
        let params = toy_params();
        let mut pairs = toy_pairs(5);
        for pair in pairs.iter_mut() {
            let d = pair_diagnostics(&params, pair).unwrap();
            pair.label = d.predicted;
        }
        assert_eq!(emu_accuracy(&params, &pairs).unwrap(), 1.0);
    }

    #[test]
    fn single_unit_pairs_score_perfect_accuracy_but_no_variance() {
        let params = toy_params();
        let pairs: Vec<PairExample> = toy_pairs(3)
            .into_iter()
            .map(|mut p| {
                p.units = vec![UnitSpan {
                    index: 0,
                    char_start: 0,
                    char_end: 0,
                    tok_start: 1,
                    tok_end: 5,
                }];
                p.label = 0;
                p
            })
            .collect();
        assert_eq!(emu_accuracy(&params, &pairs).unwrap(), 1.0);
        assert_eq!(
            unit_balance_variance(&params, &pairs).unwrap_err(),
            Error::EmptySample
        );
    }

    #[test]
    fn empty_sample_errors() {
        let params = toy_params();
        assert_eq!(emu_accuracy(&params, &[]).unwrap_err(), Error::EmptySample);
    }
}
