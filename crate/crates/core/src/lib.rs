//! Core algorithms for a unit-aware dense-retrieval training lab.
//!
//! A passage is segmented into sentence units. For each positive
//! query-passage pair an annotator marks the *essential matching unit* (the
//! sentence that actually answers the query, scored by BM25 plus an optional
//! reader distribution). A small transformer dual encoder is then trained
//! with three losses: the usual contrastive task loss, a balance loss that
//! keeps the passage representation equally similar to every unit, and an
//! extraction loss that makes the query-passage matching representation pick
//! out the annotated unit. Retrieval metrics and representation diagnostics
//! close the loop.
//!
//! The crate is `no_std` + `alloc`: everything here is deterministic
//! computation over owned buffers. File formats, the CLI, and parallel
//! dispatch live in the companion `berm-cli` crate.

#![no_std]
#![forbid(unsafe_code)]
// index-synchronized loops over several flat buffers read better than
// zipped iterator chains in the numeric kernels
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analyze;
pub mod annotate;
pub mod bm25;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod math;
pub mod objective;
pub mod rng;
pub mod text;
pub mod train;

pub use error::{Error, Result};
