//! Seeded synthetic corpus generator.
//!
//! Two constructions, both with a provable gold unit per query:
//!
//! * `Exclusive` — each query owns a private slice of the signal
//!   vocabulary; its words appear nowhere else in the corpus. Overlap is
//!   unique in the strongest sense.
//! * `Compositional` — signal words live on a grid Z_p x {0..w-1} and each
//!   query's word tuple is an arithmetic progression across the columns.
//!   Two progressions agree in at most one position, so within a passage
//!   the gold unit is still the only one sharing anything with the query,
//!   and any *other* passage shares at most one word. Held-out queries
//!   therefore recombine trained words, which keeps zero-shot retrieval
//!   meaningful at this scale.
//!
//! Distractor sentences always draw from a disjoint filler vocabulary.

use anyhow::{bail, Result};

use berm_core::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthMode {
    Exclusive,
    Compositional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    pub mode: SynthMode,
    pub queries: usize,
    /// Distractor sentences per passage (sentences no query targets).
    pub distractors: usize,
    /// Queries sharing one passage, each targeting its own sentence.
    pub queries_per_passage: usize,
    /// Signal vocabulary size (exclusive mode only; compositional mode
    /// derives its vocabulary from the progression grid).
    pub signal_vocab: usize,
    pub distractor_vocab: usize,
    /// Signal words per query.
    pub signal_words: usize,
    /// Words per distractor sentence.
    pub sentence_words: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            mode: SynthMode::Exclusive,
            queries: 50,
            distractors: 3,
            queries_per_passage: 1,
            signal_vocab: 600,
            distractor_vocab: 120,
            signal_words: 3,
            sentence_words: 6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub corpus: Vec<(String, String)>,
    pub queries: Vec<(String, String)>,
    pub qrels: Vec<(String, String, u32)>,
    /// (query id, passage id, gold unit index)
    pub gold: Vec<(String, String, usize)>,
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Word tuples for every query. Exclusive mode partitions the vocabulary;
/// compositional mode uses arithmetic progressions over Z_p across
/// `signal_words` columns (pairwise intersection at most one word).
fn signal_tuples(spec: &SynthSpec, rng: &mut Rng) -> Result<Vec<Vec<String>>> {
    match spec.mode {
        SynthMode::Exclusive => {
            if spec.signal_vocab < spec.queries * spec.signal_words {
                bail!(
                    "signal vocabulary too small: {} words for {} queries x {} words each",
                    spec.signal_vocab,
                    spec.queries,
                    spec.signal_words
                );
            }
            Ok((0..spec.queries)
                .map(|q| {
                    (0..spec.signal_words)
                        .map(|w| format!("sig{:05}", q * spec.signal_words + w))
                        .collect()
                })
                .collect())
        }
        SynthMode::Compositional => {
            if spec.signal_words < 2 {
                bail!("compositional mode needs at least two signal words per query");
            }
            let mut p = 2;
            while p * p < spec.queries || !is_prime(p) {
                p += 1;
            }
            let mut slots: Vec<usize> = (0..p * p).collect();
            rng.shuffle(&mut slots);
            Ok(slots[..spec.queries]
                .iter()
                .map(|&t| {
                    let (x, d) = (t / p, t % p);
                    (0..spec.signal_words)
                        .map(|col| format!("sig{col}x{:03}", (x + col * d) % p))
                        .collect()
                })
                .collect())
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.queries == 0
        || spec.distractors == 0
        || spec.signal_words == 0
        || spec.sentence_words == 0
    {
        bail!("queries, distractors, signal_words, and sentence_words must all be positive");
    }
    if spec.queries_per_passage == 0 || !spec.queries.is_multiple_of(spec.queries_per_passage) {
        bail!(
            "queries ({}) must be a positive multiple of queries_per_passage ({})",
            spec.queries,
            spec.queries_per_passage
        );
    }
    if spec.distractor_vocab == 0 {
        bail!("distractor vocabulary too small: need at least one word");
    }

    let mut rng = Rng::derive(spec.seed, 0x73796e74);
    let tuples = signal_tuples(spec, &mut rng)?;
    let passages = spec.queries / spec.queries_per_passage;
    let sentences_per_passage = spec.queries_per_passage + spec.distractors;
    let mut data = SynthData {
        corpus: Vec::with_capacity(passages),
        queries: Vec::with_capacity(spec.queries),
        qrels: Vec::with_capacity(spec.queries),
        gold: Vec::with_capacity(spec.queries),
    };
    for p in 0..passages {
        let passage_id = format!("d{p:04}");
        // each of this passage's queries targets its own sentence slot
        let mut slots: Vec<usize> = (0..sentences_per_passage).collect();
        rng.shuffle(&mut slots);
        let gold_slots = &slots[..spec.queries_per_passage];
        let mut sentences = vec![String::new(); sentences_per_passage];
        for (k, &slot) in gold_slots.iter().enumerate() {
            let q = p * spec.queries_per_passage + k;
            let signal = &tuples[q];
            sentences[slot] = format!("{}.", signal.join(" "));
            data.queries.push((format!("q{q:04}"), signal.join(" ")));
            data.qrels.push((format!("q{q:04}"), passage_id.clone(), 1));
            data.gold
                .push((format!("q{q:04}"), passage_id.clone(), slot));
        }
        for sentence in sentences.iter_mut() {
            if sentence.is_empty() {
                let words: Vec<String> = (0..spec.sentence_words)
                    .map(|_| format!("fil{:05}", rng.next_range(spec.distractor_vocab)))
                    .collect();
                *sentence = format!("{}.", words.join(" "));
            }
        }
        data.corpus.push((passage_id, sentences.join(" ")));
    }
    Ok(data)
}

/// Write corpus.jsonl, queries.jsonl, qrels.tsv, and gold.tsv into `dir`.
pub fn write(data: &SynthData, dir: &std::path::Path) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut corpus = crate::data::create(&dir.join("corpus.jsonl"))?;
    for (id, text) in &data.corpus {
        writeln!(corpus, "{}", serde_json::json!({ "_id": id, "text": text }))?;
    }
    corpus.flush()?;
    let mut queries = crate::data::create(&dir.join("queries.jsonl"))?;
    for (id, text) in &data.queries {
        writeln!(
            queries,
            "{}",
            serde_json::json!({ "_id": id, "text": text })
        )?;
    }
    queries.flush()?;
    crate::data::write_qrels(&dir.join("qrels.tsv"), &data.qrels)?;
    crate::data::write_gold(&dir.join("gold.tsv"), &data.gold)?;
    Ok(())
}
