//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Every unit of the passage lost all of its tokens to truncation.
    UntokenizablePassage {
        id: String,
    },
    /// A query produced no content tokens beyond the [CLS] marker.
    EmptyQuery {
        id: String,
    },
    /// BM25 statistics were requested over zero units.
    EmptyUnitCorpus,
    /// A reader distribution does not cover the unit's token range.
    ReaderLengthMismatch {
        len: usize,
        needed: usize,
    },
    /// Token id outside the embedding table.
    TokenOutOfRange {
        token: u32,
        vocab_size: usize,
    },
    /// Sequence longer than the position table.
    SequenceTooLong {
        len: usize,
        max_len: usize,
    },
    /// Vectors of unequal dimension where equal dimension is required.
    DimensionMismatch {
        left: usize,
        right: usize,
    },
    /// A non-finite value reached a computation that requires finite input.
    NonFinite {
        what: &'static str,
    },
    /// Label index outside the unit list.
    InvalidLabel {
        label: usize,
        units: usize,
    },
    /// A unit span is empty or outside the hidden-state matrix.
    BadSpan {
        tok_start: usize,
        tok_end: usize,
        len: usize,
    },
    /// Contrastive loss needs at least one negative.
    EmptyNegatives,
    EmptyBatch,
    /// Annotation units do not line up with the re-tokenized passage.
    Misaligned {
        query_id: String,
        passage_id: String,
        detail: String,
    },
    /// Training produced a non-finite loss for this pair.
    NonFiniteLoss {
        query_id: String,
        passage_id: String,
    },
    EmptyCorpus,
    /// A diagnostic was asked to average over zero usable items.
    EmptySample,
    /// Configuration field out of range.
    BadConfig {
        detail: String,
    },
}

impl core::error::Error for Error {}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UntokenizablePassage { id } => {
                write!(f, "untokenizable passage: {id}")
            }
            Error::EmptyQuery { id } => {
                write!(f, "query {id} has no tokens after tokenization")
            }
            Error::EmptyUnitCorpus => write!(f, "cannot build BM25 statistics over zero units"),
            Error::ReaderLengthMismatch { len, needed } => write!(
                f,
                "reader/passage length mismatch: distribution has {len} entries, unit needs {needed}"
            ),
            Error::TokenOutOfRange { token, vocab_size } => {
                write!(f, "token id {token} outside vocabulary of size {vocab_size}")
            }
            Error::SequenceTooLong { len, max_len } => {
                write!(f, "sequence of length {len} exceeds max_len {max_len}")
            }
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::InvalidLabel { label, units } => {
                write!(f, "label {label} outside unit list of length {units}")
            }
            Error::BadSpan {
                tok_start,
                tok_end,
                len,
            } => write!(
                f,
                "invalid unit span [{tok_start}, {tok_end}) for sequence of length {len}"
            ),
            Error::EmptyNegatives => write!(f, "contrastive loss requires at least one negative"),
            Error::EmptyBatch => write!(f, "empty batch"),
            Error::Misaligned {
                query_id,
                passage_id,
                detail,
            } => write!(
                f,
                "annotation misaligned for pair ({query_id}, {passage_id}): {detail}"
            ),
            Error::NonFiniteLoss {
                query_id,
                passage_id,
            } => write!(
                f,
                "non-finite loss on pair ({query_id}, {passage_id})"
            ),
            Error::EmptyCorpus => write!(f, "empty corpus"),
            Error::EmptySample => write!(f, "no usable items in sample"),
            Error::BadConfig { detail } => write!(f, "bad config: {detail}"),
        }
    }
}
