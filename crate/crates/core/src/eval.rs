//! Exact brute-force retrieval and evaluation metrics: nDCG@k, top-k hit
//! rate, and corpus-level Jaccard unigram similarity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{dot, log2, powi2};
use crate::text::{alnum_runs, lowercase_alnum};

/// Passage vectors with their ids, one row per passage.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub ids: Vec<String>,
    pub dim: usize,
    pub vectors: Vec<f64>,
}

impl EncodedCorpus {
    pub fn new(dim: usize) -> EncodedCorpus {
        EncodedCorpus {
            ids: Vec::new(),
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn push(&mut self, id: String, vector: &[f64]) {
        debug_assert_eq!(vector.len(), self.dim);
        self.ids.push(id);
        self.vectors.extend_from_slice(vector);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

/// Full-scan top-k by dot product. Ties break toward the lexicographically
/// smaller passage id, so rankings are deterministic.
pub fn retrieve(query: &[f64], corpus: &EncodedCorpus, k: usize) -> Result<Vec<(usize, f64)>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    debug_assert!(k >= 1);
    let mut scored: Vec<(usize, f64)> = (0..corpus.len())
        .map(|i| (i, dot(query, corpus.vector(i))))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| corpus.ids[a.0].cmp(&corpus.ids[b.0]))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Graded relevance judgments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Qrels {
        Qrels::default()
    }

    pub fn insert(&mut self, query_id: &str, passage_id: &str, relevance: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(passage_id.into(), relevance);
    }

    pub fn relevance(&self, query_id: &str, passage_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|m| m.get(passage_id))
            .copied()
            .unwrap_or(0)
    }

    /// Queries with at least one positively judged passage.
    pub fn queries_with_relevant(&self) -> impl Iterator<Item = &String> {
        self.judgments
            .iter()
            .filter(|(_, docs)| docs.values().any(|&r| r > 0))
            .map(|(q, _)| q)
    }

    pub fn relevant_grades_desc(&self, query_id: &str) -> Vec<u32> {
        let mut grades: Vec<u32> = self
            .judgments
            .get(query_id)
            .map(|m| m.values().copied().filter(|&r| r > 0).collect())
            .unwrap_or_default();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        grades
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, u32>)> {
        self.judgments.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// Ranked lists per query, scores non-increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievalRun {
    ranked: BTreeMap<String, Vec<(String, f64)>>,
}

impl RetrievalRun {
    pub fn new() -> RetrievalRun {
        RetrievalRun::default()
    }

    pub fn insert(&mut self, query_id: &str, ranking: Vec<(String, f64)>) {
        self.ranked.insert(query_id.into(), ranking);
    }

    pub fn ranking(&self, query_id: &str) -> Option<&[(String, f64)]> {
        self.ranked.get(query_id).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<(String, f64)>)> {
        self.ranked.iter()
    }
}

/// DCG with the trec-style graded gain (2^rel - 1) / log2(rank + 1).
fn dcg(grades: impl Iterator<Item = u32>, k: usize) -> f64 {
    let mut acc = 0.0;
    for (i, rel) in grades.take(k).enumerate() {
        if rel > 0 {
            acc += (powi2(rel) - 1.0) / log2((i + 2) as f64);
        }
    }
    acc
}

/// Mean nDCG@k over queries with at least one relevant passage; queries
/// missing from the run contribute zero.
pub fn ndcg_at_k(run: &RetrievalRun, qrels: &Qrels, k: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for query_id in qrels.queries_with_relevant() {
        count += 1;
        let ideal = dcg(qrels.relevant_grades_desc(query_id).into_iter(), k);
        if ideal == 0.0 {
            continue;
        }
        let got = match run.ranking(query_id) {
            Some(ranking) => dcg(
                ranking
                    .iter()
                    .map(|(pid, _)| qrels.relevance(query_id, pid)),
                k,
            ),
            None => 0.0,
        };
        sum += got / ideal;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Fraction of queries (with at least one relevant passage) whose top k
/// contains a relevant passage.
pub fn top_k_hit(run: &RetrievalRun, qrels: &Qrels, k: usize) -> f64 {
    let mut hits = 0usize;
    let mut count = 0usize;
    for query_id in qrels.queries_with_relevant() {
        count += 1;
        if let Some(ranking) = run.ranking(query_id) {
            if ranking
                .iter()
                .take(k)
                .any(|(pid, _)| qrels.relevance(query_id, pid) > 0)
            {
                hits += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        hits as f64 / count as f64
    }
}

/// 100 * |A and B| / |A or B| over lowercased unigram sets of two corpora.
pub fn jaccard_unigrams<'a, A, B>(corpus_a: A, corpus_b: B) -> f64
where
    A: IntoIterator<Item = &'a str>,
    B: IntoIterator<Item = &'a str>,
{
    let set_of = |texts: &mut dyn Iterator<Item = &'a str>| -> BTreeSet<String> {
        let mut set = BTreeSet::new();
        for text in texts {
            for (s, e) in alnum_runs(text) {
                set.insert(lowercase_alnum(&text[s..e]));
            }
        }
        set
    };
    let a = set_of(&mut corpus_a.into_iter());
    let b = set_of(&mut corpus_b.into_iter());
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    100.0 * inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn corpus(vectors: &[(&str, &[f64])]) -> EncodedCorpus {
        let dim = vectors[0].1.len();
        let mut c = EncodedCorpus::new(dim);
        for (id, v) in vectors {
            c.push(id.to_string(), v);
        }
        c
    }

    #[test]
    fn retrieve_ranks_matching_vector_first() {
        let c = corpus(&[("a", &[0.0, 0.1]), ("b", &[1.0, 0.0]), ("c", &[0.1, 0.0])]);
        let top = retrieve(&[1.0, 0.0], &c, 2).unwrap();
        assert_eq!(c.ids[top[0].0], "b");
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn retrieve_full_ranking_when_k_exceeds_corpus() {
        let c = corpus(&[("a", &[1.0]), ("b", &[2.0])]);
        let top = retrieve(&[1.0], &c, 10).unwrap();
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn retrieve_breaks_ties_by_id() {
        let c = corpus(&[("z", &[1.0]), ("a", &[1.0]), ("m", &[1.0])]);
        let top = retrieve(&[1.0], &c, 3).unwrap();
        let ids: Vec<&str> = top.iter().map(|&(i, _)| c.ids[i].as_str()).collect();
        assert_eq!(ids, vec!["a", "m", "z"]);
    }

    #[test]
    fn retrieve_empty_corpus_errors() {
        let c = EncodedCorpus::new(2);
        assert_eq!(
            retrieve(&[1.0, 0.0], &c, 1).unwrap_err(),
            Error::EmptyCorpus
        );
    }

    #[test]
    fn ndcg_perfect_ranking_is_one() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        let mut run = RetrievalRun::new();
        run.insert("q1", vec![("d1".into(), 2.0), ("d2".into(), 1.0)]);
        assert_eq!(ndcg_at_k(&run, &qrels, 10), 1.0);
    }

    #[test]
    fn ndcg_rank_two_single_relevant() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        let mut run = RetrievalRun::new();
        run.insert("q1", vec![("d9".into(), 2.0), ("d1".into(), 1.0)]);
        let got = ndcg_at_k(&run, &qrels, 10);
        assert!((got - 1.0 / log2(3.0)).abs() < 1e-12);
        assert!((got - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn ndcg_no_relevant_retrieved_is_zero() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        let mut run = RetrievalRun::new();
        run.insert("q1", vec![("d2".into(), 2.0), ("d3".into(), 1.0)]);
        assert_eq!(ndcg_at_k(&run, &qrels, 10), 0.0);
    }

    #[test]
    fn ndcg_excludes_queries_without_relevant_docs() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        qrels.insert("q2", "d1", 0); // judged but nothing relevant
        let mut run = RetrievalRun::new();
        run.insert("q1", vec![("d1".into(), 1.0)]);
        run.insert("q2", vec![("d1".into(), 1.0)]);
        assert_eq!(ndcg_at_k(&run, &qrels, 10), 1.0);
    }

    #[test]
    fn top_k_hit_counts_fractions() {
        let mut qrels = Qrels::new();
        for q in ["q1", "q2", "q3", "q4"] {
            qrels.insert(q, "gold", 1);
        }
        let mut run = RetrievalRun::new();
        run.insert("q1", vec![("gold".into(), 1.0)]);
        run.insert("q2", vec![("other".into(), 1.0)]);
        run.insert("q3", vec![("other".into(), 1.0)]);
        run.insert("q4", vec![("other".into(), 1.0)]);
        assert_eq!(top_k_hit(&run, &qrels, 20), 0.25);
        let mut all = RetrievalRun::new();
        for q in ["q1", "q2", "q3", "q4"] {
            all.insert(q, vec![("gold".into(), 1.0)]);
        }
        assert_eq!(top_k_hit(&all, &qrels, 20), 1.0);
        let none = RetrievalRun::new();
        assert_eq!(top_k_hit(&none, &qrels, 20), 0.0);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard_unigrams(["a b"], ["a b"]), 100.0);
        assert_eq!(jaccard_unigrams(["a b"], ["c d"]), 0.0);
        let j = jaccard_unigrams(["a b"], ["b c"]);
        assert!((j - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn jaccard_is_symmetric_and_case_insensitive() {
        let a = ["The cat sat", "on a mat"];
        let b = ["A CAT", "barked"];
        assert_eq!(jaccard_unigrams(a, b), jaccard_unigrams(b, a));
        assert_eq!(jaccard_unigrams(["HELLO world"], ["hello WORLD"]), 100.0);
    }
}
