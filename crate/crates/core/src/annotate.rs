//! Essential-matching-unit annotation for positive query-passage pairs.
//!
//! Each unit u_i of the positive passage gets a hybrid score
//! h_i = bm25(q, u_i) + delta * r_i, where r_i is the maximum of a reader
//! model's answer-start distribution over the unit's token positions (zero
//! when no reader distribution is supplied). The unit with the largest h_i
//! is labeled essential; ties go to the lowest unit index.

use alloc::string::String;
use alloc::vec::Vec;

use crate::bm25::Bm25Stats;
use crate::error::{Error, Result};
use crate::math::argmax_lowest;
use crate::text::{Passage, Query, UnitSpan};

pub const DEFAULT_DELTA: f64 = 0.1;

/// Per-unit hybrid scores and the essential-unit label for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPair {
    pub query_id: String,
    pub passage_id: String,
    pub units: Vec<UnitSpan>,
    /// Hybrid matching scores, one per unit.
    pub scores: Vec<f64>,
    /// Index of the essential matching unit (argmax of `scores`).
    pub label: usize,
}

impl AnnotatedPair {
    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// One-hot label vector.
    pub fn one_hot(&self) -> Vec<u8> {
        let mut y = alloc::vec![0u8; self.units.len()];
        y[self.label] = 1;
        y
    }
}

/// r_i = max of the distribution over the unit's token positions.
pub fn reader_unit_score(dist: &[f64], span: &UnitSpan) -> Result<f64> {
    if span.tok_end > dist.len() || span.tok_start >= span.tok_end {
        return Err(Error::ReaderLengthMismatch {
            len: dist.len(),
            needed: span.tok_end,
        });
    }
    let mut max = f64::NEG_INFINITY;
    for &a in &dist[span.tok_start..span.tok_end] {
        if a > max {
            max = a;
        }
    }
    Ok(max)
}

/// Score every unit of the passage against the query and label the argmax.
pub fn annotate_pair(
    query: &Query,
    passage: &Passage,
    stats: &Bm25Stats,
    delta: f64,
    reader: Option<&[f64]>,
) -> Result<AnnotatedPair> {
    debug_assert!(delta >= 0.0);
    if let Some(dist) = reader {
        if dist.len() != passage.tokens.len() {
            return Err(Error::ReaderLengthMismatch {
                len: dist.len(),
                needed: passage.tokens.len(),
            });
        }
    }
    let mut scores = Vec::with_capacity(passage.units.len());
    for unit in &passage.units {
        let mut h = stats.score(query.content_tokens(), passage.unit_tokens(unit));
        if let Some(dist) = reader {
            h += delta * reader_unit_score(dist, unit)?;
        }
        scores.push(h);
    }
    if scores.is_empty() {
        return Err(Error::UntokenizablePassage {
            id: passage.id.clone(),
        });
    }
    let label = argmax_lowest(&scores);
    Ok(AnnotatedPair {
        query_id: query.id.clone(),
        passage_id: passage.id.clone(),
        units: passage.units.clone(),
        scores,
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bm25::{build_bm25_stats, DEFAULT_B, DEFAULT_K1};
    use crate::text::Vocabulary;
    use alloc::vec;

    fn span(idx: usize, ts: usize, te: usize) -> UnitSpan {
        UnitSpan {
            index: idx,
            char_start: 0,
            char_end: 0,
            tok_start: ts,
            tok_end: te,
        }
    }

    #[test]
    fn reader_score_is_max_over_slice() {
        let a = [0.1, 0.7, 0.2];
        assert_eq!(reader_unit_score(&a, &span(0, 1, 3)).unwrap(), 0.7);
        assert_eq!(reader_unit_score(&a, &span(0, 0, 3)).unwrap(), 0.7);
        assert_eq!(reader_unit_score(&[0.0, 0.0], &span(0, 0, 2)).unwrap(), 0.0);
    }

    #[test]
    fn reader_score_rejects_out_of_range_span() {
        let err = reader_unit_score(&[0.5, 0.5], &span(0, 1, 3)).unwrap_err();
        assert!(matches!(err, Error::ReaderLengthMismatch { .. }));
    }

    #[test]
    fn hybrid_score_and_label() {
        // Passage "heart attack. other words." where the query hits unit 0
        // with bm25 = ln 2, and the reader peaks at 0.7 inside unit 0.
        let vocab = Vocabulary::build(["heart attack other words", "heart attack"]);
        let passage = Passage::prepare("p1", "Heart attack. Other words.", &vocab, 16).unwrap();
        let query = Query::prepare("q1", "heart", &vocab, 16).unwrap();
        // Stats such that df[heart]=1 over the two units and dl = avgdl.
        let unit_tokens: Vec<&[u32]> = passage
            .units
            .iter()
            .map(|u| passage.unit_tokens(u))
            .collect();
        let stats = build_bm25_stats(unit_tokens, DEFAULT_K1, DEFAULT_B).unwrap();
        let reader = vec![0.0, 0.7, 0.3, 0.0, 0.0];
        let pair = annotate_pair(&query, &passage, &stats, 0.1, Some(&reader)).unwrap();
        assert!((pair.scores[0] - (core::f64::consts::LN_2 + 0.07)).abs() < 1e-12);
        assert_eq!(pair.scores[1], 0.0);
        assert_eq!(pair.label, 0);
        assert_eq!(pair.one_hot(), vec![1, 0]);
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let vocab = Vocabulary::build(["aa bb. aa bb."]);
        let passage = Passage::prepare("p", "aa bb. aa bb.", &vocab, 16).unwrap();
        let query = Query::prepare("q", "aa", &vocab, 16).unwrap();
        let unit_tokens: Vec<&[u32]> = passage
            .units
            .iter()
            .map(|u| passage.unit_tokens(u))
            .collect();
        let stats = build_bm25_stats(unit_tokens, DEFAULT_K1, DEFAULT_B).unwrap();
        let pair = annotate_pair(&query, &passage, &stats, 0.1, None).unwrap();
        assert_eq!(pair.scores[0], pair.scores[1]);
        assert_eq!(pair.label, 0);
    }

    #[test]
    fn single_unit_is_always_essential() {
        let vocab = Vocabulary::build(["lone sentence"]);
        let passage = Passage::prepare("p", "lone sentence", &vocab, 16).unwrap();
        let query = Query::prepare("q", "nothing shared", &vocab, 16).unwrap();
        let unit_tokens: Vec<&[u32]> = passage
            .units
            .iter()
            .map(|u| passage.unit_tokens(u))
            .collect();
        let stats = build_bm25_stats(unit_tokens, DEFAULT_K1, DEFAULT_B).unwrap();
        let pair = annotate_pair(&query, &passage, &stats, 0.1, None).unwrap();
        assert_eq!(pair.one_hot(), vec![1]);
    }

    #[test]
    fn reader_length_must_match_passage() {
        let vocab = Vocabulary::build(["one two"]);
        let passage = Passage::prepare("p", "one two", &vocab, 16).unwrap();
        let query = Query::prepare("q", "one", &vocab, 16).unwrap();
        let unit_tokens: Vec<&[u32]> = passage
            .units
            .iter()
            .map(|u| passage.unit_tokens(u))
            .collect();
        let stats = build_bm25_stats(unit_tokens, DEFAULT_K1, DEFAULT_B).unwrap();
        let short = vec![0.5];
        let err = annotate_pair(&query, &passage, &stats, 0.1, Some(&short)).unwrap_err();
        assert!(matches!(err, Error::ReaderLengthMismatch { .. }));
    }
}
