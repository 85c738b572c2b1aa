//! Okapi BM25 over sentence units.
//!
//! Statistics (document frequency, average length) are computed over the
//! multiset of units being annotated, treating each unit as a document.
//! Defaults k1=0.9, b=0.4; idf uses the +1-inside-log form and is therefore
//! never negative.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

pub const DEFAULT_K1: f64 = 0.9;
pub const DEFAULT_B: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Stats {
    /// Total number of units the statistics were built over.
    pub n_units: usize,
    /// Mean unit length in tokens.
    pub avgdl: f64,
    /// Unit document frequency per token id.
    df: BTreeMap<u32, u32>,
    pub k1: f64,
    pub b: f64,
}

/// Count unit document frequencies and the mean unit length. A token
/// repeated within one unit counts once toward df.
pub fn build_bm25_stats<'a, I>(units: I, k1: f64, b: f64) -> Result<Bm25Stats>
where
    I: IntoIterator<Item = &'a [u32]>,
{
    let mut df: BTreeMap<u32, u32> = BTreeMap::new();
    let mut n_units = 0usize;
    let mut total_len = 0usize;
    for unit in units {
        n_units += 1;
        total_len += unit.len();
        let distinct: BTreeSet<u32> = unit.iter().copied().collect();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if n_units == 0 {
        return Err(Error::EmptyUnitCorpus);
    }
    Ok(Bm25Stats {
        n_units,
        avgdl: total_len as f64 / n_units as f64,
        df,
        k1,
        b,
    })
}

impl Bm25Stats {
    pub fn df(&self, token: u32) -> u32 {
        self.df.get(&token).copied().unwrap_or(0)
    }

    /// idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1).
    pub fn idf(&self, token: u32) -> f64 {
        let n = self.n_units as f64;
        let df = self.df(token) as f64;
        libm::log((n - df + 0.5) / (df + 0.5) + 1.0)
    }

    /// Okapi score of `unit` against the query terms. Terms are deduplicated
    /// and summed in ascending token-id order.
    pub fn score(&self, query_terms: &[u32], unit: &[u32]) -> f64 {
        let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
        for &t in unit {
            *tf.entry(t).or_insert(0) += 1;
        }
        let dl = unit.len() as f64;
        let unique: BTreeSet<u32> = query_terms.iter().copied().collect();
        let mut score = 0.0;
        for t in unique {
            let f = match tf.get(&t) {
                Some(&f) => f as f64,
                None => continue,
            };
            let norm = f + self.k1 * (1.0 - self.b + self.b * dl / self.avgdl);
            score += self.idf(t) * f * (self.k1 + 1.0) / norm;
        }
        score
    }
}
