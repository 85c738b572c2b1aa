//! Shared assembly between commands: vocabulary construction, passage and
//! query preparation, and turning annotation records into training pairs.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};

use berm_core::objective::PairExample;
use berm_core::text::{Passage, Query, Vocabulary};

use crate::data::{AnnotationRecord, RawDoc};

/// Vocabulary over the training corpus texts (min frequency 1). Query-only
/// tokens map to [UNK] downstream.
pub fn build_vocab(corpus: &[RawDoc]) -> Vocabulary {
    Vocabulary::build(corpus.iter().map(|d| d.text.as_str()))
}

pub fn prepare_passages(
    corpus: &[RawDoc],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<BTreeMap<String, Passage>> {
    let mut map = BTreeMap::new();
    for doc in corpus {
        let passage = Passage::prepare(&doc.id, &doc.text, vocab, max_len)?;
        map.insert(doc.id.clone(), passage);
    }
    Ok(map)
}

pub fn prepare_queries(
    queries: &[RawDoc],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<BTreeMap<String, Query>> {
    let mut map = BTreeMap::new();
    for doc in queries {
        let query = Query::prepare(&doc.id, &doc.text, vocab, max_len)?;
        map.insert(doc.id.clone(), query);
    }
    Ok(map)
}

/// Resolve annotation records against prepared queries and passages,
/// producing validated training pairs in record order. Hard negatives, when
/// supplied, are looked up per query id.
pub fn assemble_pairs(
    records: &[AnnotationRecord],
    queries: &BTreeMap<String, Query>,
    passages: &BTreeMap<String, Passage>,
    negatives: Option<&BTreeMap<String, Vec<String>>>,
) -> Result<Vec<PairExample>> {
    let mut pairs = Vec::with_capacity(records.len());
    for rec in records {
        let query = queries.get(&rec.query_id).ok_or_else(|| {
            anyhow!(
                "annotation references unknown query {} (pair {}, {})",
                rec.query_id,
                rec.query_id,
                rec.passage_id
            )
        })?;
        let passage = passages.get(&rec.passage_id).ok_or_else(|| {
            anyhow!(
                "annotation references unknown passage {} (pair {}, {})",
                rec.passage_id,
                rec.query_id,
                rec.passage_id
            )
        })?;
        let mut neg_tokens = Vec::new();
        if let Some(neg_map) = negatives {
            for neg_id in neg_map
                .get(&rec.query_id)
                .map(|v| v.as_slice())
                .unwrap_or(&[])
            {
                let neg = passages.get(neg_id).ok_or_else(|| {
                    anyhow!(
                        "hard negative {neg_id} for query {} not in corpus",
                        rec.query_id
                    )
                })?;
                neg_tokens.push(neg.tokens.clone());
            }
        }
        let pair = PairExample {
            query_id: rec.query_id.clone(),
            passage_id: rec.passage_id.clone(),
            query: query.tokens.clone(),
            passage: passage.tokens.clone(),
            units: rec.unit_spans(),
            label: rec.label(),
            negatives: neg_tokens,
        };
        pair.validate()?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        bail!("no annotated pairs to assemble");
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<RawDoc> {
        vec![
            RawDoc {
                id: "d1".into(),
                text: "alpha beta. gamma delta.".into(),
            },
            RawDoc {
                id: "d2".into(),
                text: "epsilon zeta. eta theta.".into(),
            },
        ]
    }

    #[test]
    fn assemble_resolves_ids_and_validates() {
        let corpus = docs();
        let vocab = build_vocab(&corpus);
        let passages = prepare_passages(&corpus, &vocab, 32).unwrap();
        let queries = prepare_queries(
            &[RawDoc {
                id: "q1".into(),
                text: "alpha".into(),
            }],
            &vocab,
            32,
        )
        .unwrap();
        let rec = AnnotationRecord {
            query_id: "q1".into(),
            passage_id: "d1".into(),
            units: vec![(1, 3), (3, 5)],
            scores: vec![0.9, 0.1],
            one_hot: vec![1, 0],
        };
        let pairs = assemble_pairs(std::slice::from_ref(&rec), &queries, &passages, None).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].label, 0);
        assert_eq!(pairs[0].passage, passages["d1"].tokens);

        let missing = AnnotationRecord {
            passage_id: "nope".into(),
            ..rec
        };
        let err = assemble_pairs(&[missing], &queries, &passages, None).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn misaligned_annotation_is_rejected() {
        let corpus = docs();
        let vocab = build_vocab(&corpus);
        let passages = prepare_passages(&corpus, &vocab, 32).unwrap();
        let queries = prepare_queries(
            &[RawDoc {
                id: "q1".into(),
                text: "alpha".into(),
            }],
            &vocab,
            32,
        )
        .unwrap();
        // annotation produced under a different max_len: covers 7 tokens
        let rec = AnnotationRecord {
            query_id: "q1".into(),
            passage_id: "d1".into(),
            units: vec![(1, 7)],
            scores: vec![0.9],
            one_hot: vec![1],
        };
        let err = assemble_pairs(&[rec], &queries, &passages, None).unwrap_err();
        assert!(err.to_string().contains("misaligned"), "{err}");
    }
}
