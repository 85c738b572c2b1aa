//! Readers and writers for every on-disk format.
//!
//! corpus.jsonl   {"_id": str, "text": str, "title"?: str}
//! queries.jsonl  {"_id": str, "text": str}
//! qrels.tsv      query-id <TAB> corpus-id <TAB> relevance, optional header
//! annotations.jsonl  {"query_id", "passage_id", "units": [[ts,te],..],
//!                     "H": [..], "Y": [0/1,..]}
//! reader.jsonl   {"query_id", "passage_id", "A": [..]}
//! negatives.jsonl {"query_id", "negative_ids": [..]}
//! run.tsv        query-id <TAB> passage-id <TAB> rank <TAB> score

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use berm_core::eval::Qrels;
use berm_core::math::argmax_lowest;
use berm_core::text::UnitSpan;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {detail}")]
    Malformed {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("duplicate id {id:?} in {path}")]
    DuplicateId { path: String, id: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type DataResult<T> = Result<T, DataError>;

fn open(path: &Path) -> DataResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn create(path: &Path) -> DataResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| DataError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: usize, detail: impl Into<String>) -> DataError {
    DataError::Malformed {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

/// A document or query as it appears on disk; `text` already has any title
/// prepended with a ". " separator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDoc {
    pub id: String,
    pub text: String,
}

#[derive(Deserialize)]
struct CorpusLine {
    #[serde(rename = "_id")]
    id: String,
    text: String,
    #[serde(default)]
    title: Option<String>,
}

pub fn load_corpus(path: &Path) -> DataResult<Vec<RawDoc>> {
    let mut docs = Vec::new();
    let mut seen = BTreeMap::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, lineno + 1, e.to_string()))?;
        if seen.insert(parsed.id.clone(), ()).is_some() {
            return Err(DataError::DuplicateId {
                path: path.display().to_string(),
                id: parsed.id,
            });
        }
        let text = match parsed.title {
            Some(title) if !title.trim().is_empty() => format!("{}. {}", title, parsed.text),
            _ => parsed.text,
        };
        docs.push(RawDoc {
            id: parsed.id,
            text,
        });
    }
    Ok(docs)
}

#[derive(Deserialize)]
struct QueryLine {
    #[serde(rename = "_id")]
    id: String,
    text: String,
}

/// Loads queries, rejecting any with no alphanumeric content (they would
/// tokenize to [CLS] alone).
pub fn load_queries(path: &Path) -> DataResult<Vec<RawDoc>> {
    let mut docs = Vec::new();
    let mut seen = BTreeMap::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: QueryLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, lineno + 1, e.to_string()))?;
        if seen.insert(parsed.id.clone(), ()).is_some() {
            return Err(DataError::DuplicateId {
                path: path.display().to_string(),
                id: parsed.id,
            });
        }
        if !parsed.text.chars().any(|c| c.is_alphanumeric()) {
            return Err(malformed(
                path,
                lineno + 1,
                format!("query {} has no tokenizable content", parsed.id),
            ));
        }
        docs.push(RawDoc {
            id: parsed.id,
            text: parsed.text,
        });
    }
    Ok(docs)
}

/// Tab-separated qrels with an optional "query-id corpus-id score" header.
pub fn load_qrels(path: &Path) -> DataResult<Qrels> {
    let mut qrels = Qrels::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if lineno == 0 && fields.first() == Some(&"query-id") {
            continue; // header
        }
        if fields.len() != 3 {
            return Err(malformed(
                path,
                lineno + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let relevance: u32 = fields[2].trim().parse().map_err(|_| {
            malformed(
                path,
                lineno + 1,
                format!("relevance {:?} is not a non-negative integer", fields[2]),
            )
        })?;
        qrels.insert(fields[0], fields[1], relevance);
    }
    Ok(qrels)
}

pub fn write_qrels(path: &Path, rows: &[(String, String, u32)]) -> DataResult<()> {
    let mut w = create(path)?;
    writeln!(w, "query-id\tcorpus-id\tscore").map_err(write_err(path))?;
    for (q, d, rel) in rows {
        writeln!(w, "{q}\t{d}\t{rel}").map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

/// One annotated pair on disk. Unit spans are token ranges; character
/// offsets are not persisted (training never needs them).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnnotationRecord {
    pub query_id: String,
    pub passage_id: String,
    pub units: Vec<(usize, usize)>,
    #[serde(rename = "H")]
    pub scores: Vec<f64>,
    #[serde(rename = "Y")]
    pub one_hot: Vec<u8>,
}

impl AnnotationRecord {
    pub fn label(&self) -> usize {
        self.one_hot.iter().position(|&y| y == 1).unwrap_or(0)
    }

    pub fn unit_spans(&self) -> Vec<UnitSpan> {
        self.units
            .iter()
            .enumerate()
            .map(|(index, &(tok_start, tok_end))| UnitSpan {
                index,
                char_start: 0,
                char_end: 0,
                tok_start,
                tok_end,
            })
            .collect()
    }
}

/// Load and validate annotation records: equal lengths, exactly one hot
/// label, and the label sitting at argmax(H) under the lowest-index
/// tie-break.
pub fn load_annotations(path: &Path) -> DataResult<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| malformed(path, lineno + 1, e.to_string()))?;
        if rec.units.is_empty()
            || rec.units.len() != rec.scores.len()
            || rec.units.len() != rec.one_hot.len()
        {
            return Err(malformed(
                path,
                lineno + 1,
                "units, H, and Y must be non-empty and equally long",
            ));
        }
        if rec.one_hot.iter().map(|&y| y as usize).sum::<usize>() != 1
            || rec.one_hot.iter().any(|&y| y > 1)
        {
            return Err(malformed(path, lineno + 1, "Y must be one-hot"));
        }
        if rec.label() != argmax_lowest(&rec.scores) {
            return Err(malformed(
                path,
                lineno + 1,
                "Y is not the argmax of H under the lowest-index tie-break",
            ));
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> DataResult<()> {
    let mut w = create(path)?;
    for rec in records {
        let line = serde_json::to_string(rec).expect("annotation serializes");
        writeln!(w, "{line}").map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

#[derive(Deserialize)]
struct ReaderLine {
    query_id: String,
    passage_id: String,
    #[serde(rename = "A")]
    dist: Vec<f64>,
}

/// Reader answer-start distributions keyed by (query id, passage id).
/// Entries must be non-negative; longer-than-passage vectors are truncated
/// by the caller together with the passage.
pub fn load_reader(path: &Path) -> DataResult<BTreeMap<(String, String), Vec<f64>>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReaderLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, lineno + 1, e.to_string()))?;
        if rec.dist.iter().any(|&a| !a.is_finite() || a < 0.0) {
            return Err(malformed(
                path,
                lineno + 1,
                "reader distribution entries must be finite and non-negative",
            ));
        }
        if map
            .insert((rec.query_id.clone(), rec.passage_id.clone()), rec.dist)
            .is_some()
        {
            return Err(DataError::DuplicateId {
                path: path.display().to_string(),
                id: format!("({}, {})", rec.query_id, rec.passage_id),
            });
        }
    }
    Ok(map)
}

#[derive(Deserialize)]
struct NegativesLine {
    query_id: String,
    negative_ids: Vec<String>,
}

pub fn load_negatives(path: &Path) -> DataResult<BTreeMap<String, Vec<String>>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NegativesLine =
            serde_json::from_str(&line).map_err(|e| malformed(path, lineno + 1, e.to_string()))?;
        if map.insert(rec.query_id.clone(), rec.negative_ids).is_some() {
            return Err(DataError::DuplicateId {
                path: path.display().to_string(),
                id: rec.query_id,
            });
        }
    }
    Ok(map)
}

/// TSV run file: query-id, passage-id, 1-based rank, score.
pub fn write_run(path: &Path, run: &berm_core::eval::RetrievalRun) -> DataResult<()> {
    let mut w = create(path)?;
    for (query_id, ranking) in run.iter() {
        for (rank, (passage_id, score)) in ranking.iter().enumerate() {
            writeln!(w, "{query_id}\t{passage_id}\t{}\t{score}", rank + 1)
                .map_err(write_err(path))?;
        }
    }
    w.flush().map_err(write_err(path))
}

/// Gold essential-unit labels emitted by the synthetic generator.
pub fn write_gold(path: &Path, rows: &[(String, String, usize)]) -> DataResult<()> {
    let mut w = create(path)?;
    writeln!(w, "query-id\tcorpus-id\tunit").map_err(write_err(path))?;
    for (q, d, unit) in rows {
        writeln!(w, "{q}\t{d}\t{unit}").map_err(write_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

pub fn load_gold(path: &Path) -> DataResult<Vec<(String, String, usize)>> {
    let mut rows = Vec::new();
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(write_err(path))?;
        if line.trim().is_empty() || (lineno == 0 && line.starts_with("query-id")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(path, lineno + 1, "expected 3 fields"));
        }
        let unit: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| malformed(path, lineno + 1, "bad unit index"))?;
        rows.push((fields[0].into(), fields[1].into(), unit));
    }
    Ok(rows)
}
