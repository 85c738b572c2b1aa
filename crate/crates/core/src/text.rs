//! Tokenization, sentence-unit segmentation, and span alignment.
//!
//! The tokenizer is a lowercase Unicode alphanumeric-run splitter: no learned
//! subword model, no external assets, and the same bytes always produce the
//! same ids. Position 0 of every token sequence is the [CLS] marker.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const CLS_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_TOKEN: &str = "[CLS]";
pub const UNK_TOKEN: &str = "[UNK]";

/// Bijective token <-> id map with fixed [CLS]=0 and [UNK]=1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    to_id: BTreeMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Build from training texts: every lowercased alphanumeric run seen at
    /// least once gets an id, assigned in lexicographic order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut seen = BTreeSet::new();
        for text in texts {
            for (start, end) in alnum_runs(text) {
                seen.insert(lowercase_alnum(&text[start..end]));
            }
        }
        let mut tokens = Vec::with_capacity(seen.len() + 2);
        tokens.push(CLS_TOKEN.to_owned());
        tokens.push(UNK_TOKEN.to_owned());
        tokens.extend(seen);
        Self::from_tokens(tokens).expect("built vocabulary is well-formed")
    }

    /// Reconstruct from an id-ordered token list (checkpoint loading).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != CLS_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::BadConfig {
                detail: "vocabulary must start with [CLS], [UNK]".into(),
            });
        }
        let mut to_id = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if to_id.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::BadConfig {
                    detail: "duplicate token in vocabulary".into(),
                });
            }
        }
        Ok(Vocabulary { to_id, tokens })
    }

    pub fn id(&self, token: &str) -> u32 {
        self.to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds [CLS] and [UNK]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Byte ranges of maximal Unicode alphanumeric runs, in order.
pub fn alnum_runs(text: &str) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            runs.push((s, i));
        }
    }
    if let Some(s) = start {
        runs.push((s, text.len()));
    }
    runs
}

pub fn lowercase_alnum(run: &str) -> String {
    run.chars().flat_map(|c| c.to_lowercase()).collect()
}

/// [CLS] followed by the ids of lowercased alphanumeric runs, truncated to
/// `max_len`. Empty text yields `[CLS_ID]` alone.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Vec<u32> {
    tokenize_with_offsets(text, vocab, max_len).0
}

/// As `tokenize`, also returning each token's source byte range. The [CLS]
/// marker gets the empty range (0, 0).
pub fn tokenize_with_offsets(
    text: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> (Vec<u32>, Vec<(usize, usize)>) {
    debug_assert!(max_len >= 1);
    let mut ids = Vec::new();
    let mut offsets = Vec::new();
    ids.push(CLS_ID);
    offsets.push((0, 0));
    for (start, end) in alnum_runs(text) {
        if ids.len() >= max_len {
            break;
        }
        ids.push(vocab.id(&lowercase_alnum(&text[start..end])));
        offsets.push((start, end));
    }
    (ids, offsets)
}

/// Sentence unit aligned to both the source text and the token sequence.
/// `char_start`/`char_end` are byte offsets into the text (always on char
/// boundaries); `tok_start`/`tok_end` index the token sequence, half-open,
/// with `tok_start >= 1` because position 0 is [CLS].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitSpan {
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub tok_start: usize,
    pub tok_end: usize,
}

impl UnitSpan {
    pub fn token_count(&self) -> usize {
        self.tok_end - self.tok_start
    }
}

const TERMINATORS: [char; 3] = ['.', '!', '?'];

/// Split text into sentence-unit byte spans. A unit ends after '.', '!' or
/// '?' followed by whitespace or end-of-text; trailing text without terminal
/// punctuation forms a final unit; empty or whitespace-only candidates are
/// dropped. Spans are trimmed of surrounding whitespace.
pub fn segment_units(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut unit_start = 0usize;
    let mut chars = text.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        if TERMINATORS.contains(&ch) {
            let boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + ch.len_utf8();
                push_trimmed(text, unit_start, end, &mut spans);
                unit_start = end;
            }
        }
    }
    push_trimmed(text, unit_start, text.len(), &mut spans);
    spans
}

fn push_trimmed(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        return;
    }
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    spans.push((start + lead, end - trail));
}

/// Attach token ranges to character spans under truncation to `max_len`.
/// Units whose tokens were entirely truncated (or that never had any) are
/// dropped and the survivors renumbered 0..n-1. A unit clipped mid-way keeps
/// its surviving prefix, with `char_end` pulled back to the last surviving
/// token. Errors when no unit survives.
pub fn align_units(
    text: &str,
    spans: &[(usize, usize)],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<UnitSpan>> {
    let (_, offsets) = tokenize_with_offsets(text, vocab, max_len);
    let mut units = Vec::new();
    for &(cs, ce) in spans {
        // Runs never cross unit boundaries (boundaries sit on punctuation and
        // whitespace), so a unit's tokens are a contiguous index range.
        let mut tok_start = None;
        let mut tok_end = 0;
        let mut last_run_end = ce;
        for (t, &(rs, re)) in offsets.iter().enumerate().skip(1) {
            if rs >= cs && re <= ce {
                if tok_start.is_none() {
                    tok_start = Some(t);
                }
                tok_end = t + 1;
                last_run_end = re;
            }
        }
        if let Some(ts) = tok_start {
            // Fewer surviving tokens than runs inside the span means the
            // tail of this unit fell past max_len.
            let clipped = tok_end - ts < alnum_runs(&text[cs..ce]).len();
            let char_end = if clipped { last_run_end } else { ce };
            units.push(UnitSpan {
                index: units.len(),
                char_start: cs,
                char_end,
                tok_start: ts,
                tok_end,
            });
        }
    }
    if units.is_empty() {
        return Err(Error::UntokenizablePassage { id: String::new() });
    }
    Ok(units)
}

/// A passage with its token sequence and aligned sentence units.
#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub id: String,
    pub text: String,
    pub tokens: Vec<u32>,
    pub units: Vec<UnitSpan>,
}

impl Passage {
    /// Tokenize, segment, and align. Errors with the passage id when every
    /// unit is truncated away.
    pub fn prepare(id: &str, text: &str, vocab: &Vocabulary, max_len: usize) -> Result<Passage> {
        let spans = segment_units(text);
        let units = align_units(text, &spans, vocab, max_len).map_err(|e| match e {
            Error::UntokenizablePassage { .. } => Error::UntokenizablePassage { id: id.into() },
            other => other,
        })?;
        Ok(Passage {
            id: id.into(),
            text: text.into(),
            tokens: tokenize(text, vocab, max_len),
            units,
        })
    }

    pub fn unit_tokens(&self, unit: &UnitSpan) -> &[u32] {
        &self.tokens[unit.tok_start..unit.tok_end]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub tokens: Vec<u32>,
}

impl Query {
    /// Rejects queries that tokenize to [CLS] alone.
    pub fn prepare(id: &str, text: &str, vocab: &Vocabulary, max_len: usize) -> Result<Query> {
        let tokens = tokenize(text, vocab, max_len);
        if tokens.len() < 2 {
            return Err(Error::EmptyQuery { id: id.into() });
        }
        Ok(Query {
            id: id.into(),
            text: text.into(),
            tokens,
        })
    }

    pub fn content_tokens(&self) -> &[u32] {
        &self.tokens[1..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vocab_of(words: &[&str]) -> Vocabulary {
        let joined = words.join(" ");
        Vocabulary::build([joined.as_str()])
    }

    #[test]
    fn tokenize_simple() {
        let vocab = vocab_of(&["attack", "heart"]);
        // lexicographic ids: attack=2, heart=3
        assert_eq!(tokenize("Heart attack.", &vocab, 16), vec![0, 3, 2]);
    }

    #[test]
    fn tokenize_empty_is_cls_only() {
        let vocab = vocab_of(&["x"]);
        assert_eq!(tokenize("", &vocab, 16), vec![0]);
    }

    #[test]
    fn tokenize_truncates_counting_cls() {
        let vocab = vocab_of(&["a", "b", "c", "d"]);
        assert_eq!(tokenize("a b c d", &vocab, 3), vec![0, 2, 3]);
    }

    #[test]
    fn tokenize_unknown_maps_to_unk() {
        let vocab = vocab_of(&["known"]);
        assert_eq!(tokenize("known stranger", &vocab, 16), vec![0, 2, 1]);
    }

    #[test]
    fn tokenize_unicode_lowercases() {
        let vocab = Vocabulary::build(["straße über"]);
        let upper = tokenize("STRASSE ÜBER", &vocab, 16);
        let lower = tokenize("strasse über", &vocab, 16);
        assert_eq!(upper, lower);
        // ß lowercases to itself, SS lowercases to ss: distinct tokens
        assert_eq!(upper[1], UNK_ID);
        assert_ne!(upper[2], UNK_ID);
    }

    #[test]
    fn segment_three_sentences() {
        let spans = segment_units("A cat. B dog? C!");
        let texts: Vec<&str> = spans
            .iter()
            .map(|&(s, e)| &"A cat. B dog? C!"[s..e])
            .collect();
        assert_eq!(texts, vec!["A cat.", "B dog?", "C!"]);
    }

    #[test]
    fn segment_without_punctuation_is_one_unit() {
        let text = "no punctuation here";
        assert_eq!(segment_units(text), vec![(0, text.len())]);
    }

    #[test]
    fn segment_drops_trailing_whitespace_unit() {
        let spans = segment_units("One.  ");
        assert_eq!(spans, vec![(0, 4)]);
    }

    #[test]
    fn segment_empty_text() {
        assert!(segment_units("").is_empty());
        assert!(segment_units("   ").is_empty());
    }

    #[test]
    fn segment_internal_punctuation_run() {
        let text = "Wait!! Done";
        let spans = segment_units(text);
        let texts: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(texts, vec!["Wait!!", "Done"]);
    }

    #[test]
    fn align_two_sentences() {
        let vocab = vocab_of(&["a", "cat", "b", "dog"]);
        let text = "A cat. B dog.";
        let spans = segment_units(text);
        let units = align_units(text, &spans, &vocab, 64).unwrap();
        assert_eq!(units.len(), 2);
        assert_eq!((units[0].tok_start, units[0].tok_end), (1, 3));
        assert_eq!((units[1].tok_start, units[1].tok_end), (3, 5));
        assert_eq!(units[1].index, 1);
    }

    #[test]
    fn align_drops_truncated_unit() {
        let vocab = vocab_of(&["a", "cat", "b", "dog"]);
        let text = "A cat. B dog.";
        let spans = segment_units(text);
        // max_len=3: [CLS] a cat; sentence 2 fully truncated
        let units = align_units(text, &spans, &vocab, 3).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!((units[0].tok_start, units[0].tok_end), (1, 3));
    }

    #[test]
    fn align_single_unit() {
        let vocab = vocab_of(&["a", "cat"]);
        let text = "A cat.";
        let units = align_units(text, &segment_units(text), &vocab, 64).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!((units[0].tok_start, units[0].tok_end), (1, 3));
    }

    #[test]
    fn align_everything_truncated_errors() {
        let vocab = vocab_of(&["a"]);
        let text = "a a a.";
        let err = align_units(text, &segment_units(text), &vocab, 1).unwrap_err();
        assert!(matches!(err, Error::UntokenizablePassage { .. }));
    }

    #[test]
    fn align_clipped_unit_keeps_prefix() {
        let vocab = vocab_of(&["a", "b", "c", "d"]);
        let text = "a b c d";
        let units = align_units(text, &segment_units(text), &vocab, 3).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!((units[0].tok_start, units[0].tok_end), (1, 3));
        assert_eq!(&text[units[0].char_start..units[0].char_end], "a b");
    }

    #[test]
    fn passage_prepare_covers_tokens() {
        let vocab = vocab_of(&["alpha", "beta", "gamma"]);
        let p = Passage::prepare("p1", "Alpha beta. Gamma.", &vocab, 16).unwrap();
        let covered: usize = p.units.iter().map(|u| u.token_count()).sum();
        assert_eq!(covered, p.tokens.len() - 1);
        assert_eq!(p.unit_tokens(&p.units[0]), &p.tokens[1..3]);
    }

    #[test]
    fn query_prepare_rejects_cls_only() {
        let vocab = vocab_of(&["x"]);
        let err = Query::prepare("q9", "?!", &vocab, 16).unwrap_err();
        assert_eq!(err, Error::EmptyQuery { id: "q9".into() });
    }

    #[test]
    fn determinism_identical_bytes() {
        let vocab = vocab_of(&["one", "two", "three"]);
        let text = "One two. Three!";
        let a = (tokenize(text, &vocab, 32), segment_units(text));
        let b = (tokenize(text, &vocab, 32), segment_units(text));
        assert_eq!(a, b);
    }
}
