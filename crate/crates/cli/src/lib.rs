//! File formats, pipeline assembly, and the `berm` command-line tool.
//!
//! Everything that touches the filesystem lives here; the numerics live in
//! `berm-core`. Inputs follow the BEIR layout (corpus.jsonl, queries.jsonl,
//! qrels.tsv) so real datasets drop in without conversion.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod parallel;
pub mod pipeline;
pub mod synth;
