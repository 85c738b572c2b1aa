//! Implementations behind the six subcommands. `main.rs` only parses
//! arguments and maps errors to exit codes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use berm_core::analyze;
use berm_core::annotate::annotate_pair;
use berm_core::bm25::build_bm25_stats;
use berm_core::encoder::{EncoderParams, Inference, Precision};
use berm_core::eval::{
    jaccard_unigrams, ndcg_at_k, retrieve, top_k_hit, EncodedCorpus, RetrievalRun,
};
use berm_core::text::{tokenize, Passage, Query, Vocabulary};
use berm_core::train::{train_epochs, verify_gradients, TrainState};

use crate::checkpoint::{self, Checkpoint};
use crate::config::TrainConfigFile;
use crate::data::{self, AnnotationRecord, RawDoc};
use crate::parallel::parallel_map;
use crate::pipeline;
use crate::synth::{self, SynthMode, SynthSpec};

#[derive(Debug, Clone, Copy)]
pub struct GlobalOpts {
    pub seed: Option<u64>,
    pub threads: usize,
    pub precision: Precision,
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

pub struct SegmentOpts {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub max_len: usize,
}

#[derive(Serialize)]
struct SegmentUnit {
    index: usize,
    char_start: usize,
    char_end: usize,
    tok_start: usize,
    tok_end: usize,
}

pub fn cmd_segment(opts: &SegmentOpts) -> Result<()> {
    let corpus = data::load_corpus(&opts.corpus)?;
    let vocab = pipeline::build_vocab(&corpus);
    let mut out = data::create(&opts.out)?;
    for doc in &corpus {
        let passage = Passage::prepare(&doc.id, &doc.text, &vocab, opts.max_len)?;
        let units: Vec<SegmentUnit> = passage
            .units
            .iter()
            .map(|u| SegmentUnit {
                index: u.index,
                char_start: u.char_start,
                char_end: u.char_end,
                tok_start: u.tok_start,
                tok_end: u.tok_end,
            })
            .collect();
        let line = serde_json::json!({ "_id": doc.id, "units": units });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    eprintln!(
        "segmented {} passages -> {}",
        corpus.len(),
        opts.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

pub struct AnnotateOpts {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub out: PathBuf,
    pub delta: f64,
    pub k1: f64,
    pub b: f64,
    pub reader: Option<PathBuf>,
    pub max_len: usize,
}

pub fn cmd_annotate(opts: &AnnotateOpts, global: &GlobalOpts) -> Result<()> {
    let corpus = data::load_corpus(&opts.corpus)?;
    let queries = data::load_queries(&opts.queries)?;
    let qrels = data::load_qrels(&opts.qrels)?;
    let reader = match &opts.reader {
        Some(path) => Some(data::load_reader(path)?),
        None => None,
    };

    let vocab = pipeline::build_vocab(&corpus);
    // positive pairs in sorted (query, passage) order
    let mut positive: Vec<(String, String)> = Vec::new();
    for (query_id, docs) in qrels.iter() {
        for (passage_id, &rel) in docs {
            if rel > 0 {
                positive.push((query_id.clone(), passage_id.clone()));
            }
        }
    }
    if positive.is_empty() {
        bail!("qrels contain no positive pairs to annotate");
    }

    let query_map: BTreeMap<&str, &RawDoc> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    let corpus_map: BTreeMap<&str, &RawDoc> = corpus.iter().map(|d| (d.id.as_str(), d)).collect();

    let mut prepared_queries: BTreeMap<String, Query> = BTreeMap::new();
    let mut prepared_passages: BTreeMap<String, Passage> = BTreeMap::new();
    for (query_id, passage_id) in &positive {
        if !prepared_queries.contains_key(query_id) {
            let raw = query_map.get(query_id.as_str()).ok_or_else(|| {
                anyhow!("pair ({query_id}, {passage_id}): query {query_id} not in queries file")
            })?;
            prepared_queries.insert(
                query_id.clone(),
                Query::prepare(&raw.id, &raw.text, &vocab, opts.max_len)?,
            );
        }
        if !prepared_passages.contains_key(passage_id) {
            let raw = corpus_map.get(passage_id.as_str()).ok_or_else(|| {
                anyhow!("pair ({query_id}, {passage_id}): passage {passage_id} not in corpus")
            })?;
            prepared_passages.insert(
                passage_id.clone(),
                Passage::prepare(&raw.id, &raw.text, &vocab, opts.max_len)?,
            );
        }
    }

    // BM25 statistics over the units of every distinct annotated passage
    let unit_tokens: Vec<&[u32]> = prepared_passages
        .values()
        .flat_map(|p| p.units.iter().map(|u| p.unit_tokens(u)))
        .collect();
    let stats = build_bm25_stats(unit_tokens, opts.k1, opts.b)?;

    let records: Vec<Result<AnnotationRecord>> =
        parallel_map(&positive, global.threads, |(query_id, passage_id)| {
            let query = &prepared_queries[query_id];
            let passage = &prepared_passages[passage_id];
            // reader distributions may cover the untruncated passage; clip
            // to the tokenized length
            let clipped: Option<Vec<f64>> = reader.as_ref().and_then(|m| {
                m.get(&(query_id.clone(), passage_id.clone())).map(|a| {
                    let mut a = a.clone();
                    a.truncate(passage.tokens.len());
                    a
                })
            });
            let pair = annotate_pair(query, passage, &stats, opts.delta, clipped.as_deref())?;
            Ok(AnnotationRecord {
                query_id: pair.query_id.clone(),
                passage_id: pair.passage_id.clone(),
                units: pair
                    .units
                    .iter()
                    .map(|u| (u.tok_start, u.tok_end))
                    .collect(),
                scores: pair.scores.clone(),
                one_hot: pair.one_hot(),
            })
        });
    let records: Vec<AnnotationRecord> = records.into_iter().collect::<Result<_>>()?;
    data::write_annotations(&opts.out, &records)?;

    let total_units: usize = records.iter().map(|r| r.units.len()).sum();
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in &records {
        *histogram.entry(rec.label()).or_insert(0) += 1;
    }
    let hist: Vec<String> = histogram
        .iter()
        .map(|(pos, count)| format!("{pos}:{count}"))
        .collect();
    eprintln!(
        "annotated {} pairs -> {} (mean units {:.2}, label positions {})",
        records.len(),
        opts.out.display(),
        total_units as f64 / records.len() as f64,
        hist.join(" ")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub struct TrainOpts {
    pub config: Option<PathBuf>,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub annotations: PathBuf,
    pub out: PathBuf,
    pub negatives: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub check_grads: bool,
}

#[derive(Serialize)]
struct EpochLine {
    epoch: u64,
    steps: u64,
    contrastive: f64,
    extract: f64,
    balance: f64,
    total: f64,
    alpha: f64,
    beta: f64,
}

pub fn cmd_train(opts: &TrainOpts, global: &GlobalOpts) -> Result<()> {
    let mut file_config = match &opts.config {
        Some(path) => TrainConfigFile::load(path)?,
        None => TrainConfigFile::default(),
    };
    if let Some(seed) = global.seed {
        file_config.seed = seed;
    }
    let config = file_config.to_core()?;

    let corpus = data::load_corpus(&opts.corpus)?;
    let queries = data::load_queries(&opts.queries)?;
    let records = data::load_annotations(&opts.annotations)?;
    let negatives = match &opts.negatives {
        Some(path) => Some(data::load_negatives(path)?),
        None => None,
    };
    if config.negatives == berm_core::objective::NegativeMode::File && negatives.is_none() {
        bail!("negatives mode \"file\" requires --negatives <path>");
    }

    // resume reuses the checkpoint's vocabulary and architecture; a fresh
    // run builds the vocabulary from the corpus
    let (mut state, vocab, start_epoch) = match &opts.resume {
        Some(path) => {
            let (state, vocab, epochs_done) = checkpoint::load(path)?.into_state()?;
            (state, vocab, epochs_done)
        }
        None => {
            let vocab = pipeline::build_vocab(&corpus);
            let hyper = file_config.hyper(vocab.len());
            (
                TrainState::new(EncoderParams::init(hyper, config.seed)),
                vocab,
                0,
            )
        }
    };
    let max_len = state.params.hyper.max_len;

    // prepare only what the pairs reference
    let mut needed_passages: BTreeSet<&str> =
        records.iter().map(|r| r.passage_id.as_str()).collect();
    if let Some(neg_map) = &negatives {
        for ids in neg_map.values() {
            needed_passages.extend(ids.iter().map(|s| s.as_str()));
        }
    }
    let needed_queries: BTreeSet<&str> = records.iter().map(|r| r.query_id.as_str()).collect();
    let corpus_needed: Vec<RawDoc> = corpus
        .iter()
        .filter(|d| needed_passages.contains(d.id.as_str()))
        .cloned()
        .collect();
    let queries_needed: Vec<RawDoc> = queries
        .iter()
        .filter(|q| needed_queries.contains(q.id.as_str()))
        .cloned()
        .collect();
    let passages = pipeline::prepare_passages(&corpus_needed, &vocab, max_len)?;
    let prepared_queries = pipeline::prepare_queries(&queries_needed, &vocab, max_len)?;
    let pairs =
        pipeline::assemble_pairs(&records, &prepared_queries, &passages, negatives.as_ref())?;

    if opts.check_grads {
        let first = berm_core::train::epoch_batches(pairs.len(), config.batch_size, config.seed, 0)
            .into_iter()
            .next()
            .ok_or_else(|| anyhow!("not enough pairs for a single batch"))?;
        let batch: Vec<_> = first.iter().map(|&i| pairs[i].clone()).collect();
        let report = verify_gradients(
            &state.params,
            &batch,
            config.negatives,
            config.alpha,
            config.beta,
            50,
            1e-5,
            1e-4,
            config.seed,
        )?;
        for term in &report.terms {
            eprintln!(
                "gradient check {}: max relative error {:.3e} over {} coordinates",
                term.term, term.max_rel_err, term.coords
            );
        }
        if !report.passed() {
            bail!("gradient verification failed; see report above");
        }
    }

    std::fs::create_dir_all(&opts.out)?;
    let metrics_path = opts.out.join("metrics.jsonl");
    let mut metrics = data::create(&metrics_path)?;
    let mut checkpoint_err = None;
    train_epochs(
        &mut state,
        &pairs,
        &config,
        start_epoch,
        |summary, state| {
            let line = EpochLine {
                epoch: summary.epoch,
                steps: summary.steps,
                contrastive: summary.mean.contrastive,
                extract: summary.mean.extract,
                balance: summary.mean.balance,
                total: summary.mean.total,
                alpha: summary.mean.alpha,
                beta: summary.mean.beta,
            };
            if let Err(e) = writeln!(metrics, "{}", serde_json::to_string(&line).unwrap()) {
                checkpoint_err.get_or_insert(anyhow!(e));
            }
            let done = summary.epoch + 1;
            if config.checkpoint_every > 0
                && done % config.checkpoint_every == 0
                && done < config.epochs
            {
                let ckpt = Checkpoint::from_state(state, &vocab, done);
                let path = opts.out.join(format!("checkpoint-epoch{done}.json"));
                if let Err(e) = checkpoint::save(&path, &ckpt) {
                    checkpoint_err.get_or_insert(e);
                }
            }
        },
    )?;
    if let Some(e) = checkpoint_err {
        return Err(e).context("writing training outputs");
    }
    metrics.flush()?;

    let final_path = opts.out.join("checkpoint.json");
    checkpoint::save(
        &final_path,
        &Checkpoint::from_state(&state, &vocab, config.epochs),
    )?;
    eprintln!(
        "trained {} pairs for {} epochs ({} steps) -> {}",
        pairs.len(),
        config.epochs.saturating_sub(start_epoch),
        state.step,
        final_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub struct EvalOpts {
    pub checkpoint: PathBuf,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub k: usize,
    pub hit_k: usize,
    pub run: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub name: Option<String>,
    pub jaccard: Option<PathBuf>,
    pub lenient: bool,
}

#[derive(Serialize)]
struct EvalConfigEcho {
    checkpoint: String,
    corpus: String,
    queries: String,
    qrels: String,
    precision: String,
}

#[derive(Serialize)]
struct MetricsReport {
    ndcg: BTreeMap<String, f64>,
    ndcg_mean: f64,
    top_k_hit: f64,
    ndcg_k: usize,
    hit_k: usize,
    query_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    jaccard_unigrams: Option<f64>,
    config: EvalConfigEcho,
}

pub fn cmd_eval(opts: &EvalOpts, global: &GlobalOpts) -> Result<()> {
    let (params, vocab, _, _) = checkpoint::load(&opts.checkpoint)?.into_parts()?;
    let max_len = params.hyper.max_len;
    let corpus = data::load_corpus(&opts.corpus)?;
    let queries = data::load_queries(&opts.queries)?;
    let qrels = data::load_qrels(&opts.qrels)?;
    if corpus.is_empty() {
        bail!("empty corpus: {}", opts.corpus.display());
    }

    if !opts.lenient {
        let query_ids: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
        let corpus_ids: BTreeSet<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
        for (query_id, docs) in qrels.iter() {
            if !query_ids.contains(query_id.as_str()) {
                bail!("qrels reference unknown query {query_id} (use --lenient to skip)");
            }
            for passage_id in docs.keys() {
                if !corpus_ids.contains(passage_id.as_str()) {
                    bail!("qrels reference unknown passage {passage_id} (use --lenient to skip)");
                }
            }
        }
    }

    let inference = Inference::new(&params, global.precision);
    let passage_vecs = parallel_map(&corpus, global.threads, |doc| {
        let tokens = tokenize(&doc.text, &vocab, max_len);
        inference.text_repr(&tokens)
    });
    let mut encoded = EncodedCorpus::new(params.hyper.dim);
    for (doc, vec) in corpus.iter().zip(passage_vecs) {
        encoded.push(doc.id.clone(), &vec?);
    }

    let depth = opts.k.max(opts.hit_k);
    let rankings = parallel_map(&queries, global.threads, |raw| -> Result<_> {
        let query = Query::prepare(&raw.id, &raw.text, &vocab, max_len)?;
        let t_q = inference.text_repr(&query.tokens)?;
        let ranked = retrieve(&t_q, &encoded, depth)?;
        Ok((
            raw.id.clone(),
            ranked
                .into_iter()
                .map(|(idx, score)| (encoded.ids[idx].clone(), score))
                .collect::<Vec<_>>(),
        ))
    });
    let mut run = RetrievalRun::new();
    for item in rankings {
        let (query_id, ranking) = item?;
        run.insert(&query_id, ranking);
    }

    let ndcg = ndcg_at_k(&run, &qrels, opts.k);
    let hit = top_k_hit(&run, &qrels, opts.hit_k);
    let query_count = qrels.queries_with_relevant().count();
    let jaccard = match &opts.jaccard {
        Some(path) => {
            let other = data::load_corpus(path)?;
            Some(jaccard_unigrams(
                corpus.iter().map(|d| d.text.as_str()),
                other.iter().map(|d| d.text.as_str()),
            ))
        }
        None => None,
    };

    if let Some(path) = &opts.run {
        data::write_run(path, &run)?;
    }

    let name = opts.name.clone().unwrap_or_else(|| file_stem(&opts.corpus));
    let mut ndcg_map = BTreeMap::new();
    ndcg_map.insert(name, ndcg);
    let report = MetricsReport {
        ndcg_mean: ndcg,
        ndcg: ndcg_map,
        top_k_hit: hit,
        ndcg_k: opts.k,
        hit_k: opts.hit_k,
        query_count,
        jaccard_unigrams: jaccard,
        config: EvalConfigEcho {
            checkpoint: file_name(&opts.checkpoint),
            corpus: file_name(&opts.corpus),
            queries: file_name(&opts.queries),
            qrels: file_name(&opts.qrels),
            precision: match global.precision {
                Precision::F32 => "f32".into(),
                Precision::F64 => "f64".into(),
            },
        },
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &opts.report {
        Some(path) => {
            let mut w = data::create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Text,
    Unit,
    Matching,
}

pub struct AnalyzeOpts {
    pub checkpoint: PathBuf,
    pub annotations: PathBuf,
    /// First corpus pairs with the annotations; extra corpora are exported
    /// only.
    pub corpus: Vec<PathBuf>,
    pub queries: PathBuf,
    pub report: Option<PathBuf>,
    pub export: Option<PathBuf>,
    pub kinds: Vec<ExportKind>,
    pub sample: usize,
}

#[derive(Serialize)]
struct AnalysisReport {
    balance_variance: f64,
    emu_accuracy: f64,
    unit_dispersion: f64,
    pairs: usize,
    variance_pairs: usize,
    dispersion_pairs: usize,
    zero_norm_units: usize,
    sample_limit: usize,
    seed: u64,
    config: AnalysisConfigEcho,
}

#[derive(Serialize)]
struct AnalysisConfigEcho {
    checkpoint: String,
    annotations: String,
}

pub fn cmd_analyze(opts: &AnalyzeOpts, global: &GlobalOpts) -> Result<()> {
    if opts.corpus.is_empty() {
        bail!("analyze needs at least one --corpus");
    }
    let (params, vocab, _, _) = checkpoint::load(&opts.checkpoint)?.into_parts()?;
    let max_len = params.hyper.max_len;
    let records = data::load_annotations(&opts.annotations)?;
    let corpus = data::load_corpus(&opts.corpus[0])?;
    let queries = data::load_queries(&opts.queries)?;

    let needed_passages: BTreeSet<&str> = records.iter().map(|r| r.passage_id.as_str()).collect();
    let needed_queries: BTreeSet<&str> = records.iter().map(|r| r.query_id.as_str()).collect();
    let corpus_needed: Vec<RawDoc> = corpus
        .iter()
        .filter(|d| needed_passages.contains(d.id.as_str()))
        .cloned()
        .collect();
    let queries_needed: Vec<RawDoc> = queries
        .iter()
        .filter(|q| needed_queries.contains(q.id.as_str()))
        .cloned()
        .collect();
    let passages = pipeline::prepare_passages(&corpus_needed, &vocab, max_len)?;
    let prepared_queries = pipeline::prepare_queries(&queries_needed, &vocab, max_len)?;
    let mut pairs = pipeline::assemble_pairs(&records, &prepared_queries, &passages, None)?;

    let seed = global.seed.unwrap_or(42);
    if pairs.len() > opts.sample {
        let mut rng = berm_core::rng::Rng::derive(seed, 0x616e6c7a);
        let mut keep = rng.sample_indices(pairs.len(), opts.sample);
        keep.sort_unstable();
        pairs = keep.into_iter().map(|i| pairs[i].clone()).collect();
    }

    let per_pair = parallel_map(&pairs, global.threads, |pair| {
        analyze::pair_diagnostics(&params, pair)
    });
    let per_pair: Vec<_> = per_pair.into_iter().collect::<Result<_, _>>()?;
    let diag = analyze::aggregate(&per_pair)?;
    if diag.zero_norm_units > 0 {
        eprintln!(
            "warning: excluded {} zero-norm unit embeddings from dispersion",
            diag.zero_norm_units
        );
    }

    let report = AnalysisReport {
        balance_variance: diag.balance_variance,
        emu_accuracy: diag.emu_accuracy,
        unit_dispersion: diag.unit_dispersion,
        pairs: diag.pairs,
        variance_pairs: diag.variance_pairs,
        dispersion_pairs: diag.dispersion_pairs,
        zero_norm_units: diag.zero_norm_units,
        sample_limit: opts.sample,
        seed,
        config: AnalysisConfigEcho {
            checkpoint: file_name(&opts.checkpoint),
            annotations: file_name(&opts.annotations),
        },
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &opts.report {
        Some(path) => {
            let mut w = data::create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }

    if let Some(path) = &opts.export {
        export_embeddings(opts, &params, &vocab, &pairs, path)?;
    }
    Ok(())
}

fn write_vector_row(
    w: &mut impl Write,
    id: &str,
    domain: &str,
    kind: &str,
    vector: &[f64],
) -> Result<()> {
    write!(w, "{id}\t{domain}\t{kind}")?;
    for v in vector {
        write!(w, "\t{v}")?;
    }
    writeln!(w)?;
    Ok(())
}

/// TSV export of text, unit, and matching representations for external
/// projection. Matching rows exist only for the annotated pairs of the
/// primary corpus.
fn export_embeddings(
    opts: &AnalyzeOpts,
    params: &EncoderParams,
    vocab: &Vocabulary,
    pairs: &[berm_core::objective::PairExample],
    path: &Path,
) -> Result<()> {
    use berm_core::encoder::{matching_representation, text_representation, unit_embeddings};
    let max_len = params.hyper.max_len;
    let mut w = data::create(path)?;
    for corpus_path in &opts.corpus {
        let domain = file_stem(corpus_path);
        let corpus = data::load_corpus(corpus_path)?;
        for doc in &corpus {
            let tokens = tokenize(&doc.text, vocab, max_len);
            let z = params.forward(&tokens)?;
            if opts.kinds.contains(&ExportKind::Text) {
                write_vector_row(&mut w, &doc.id, &domain, "text", text_representation(&z))?;
            }
            if opts.kinds.contains(&ExportKind::Unit) {
                let passage = Passage::prepare(&doc.id, &doc.text, vocab, max_len)?;
                let embs = unit_embeddings(&z, &passage.units)?;
                for (i, unit) in passage.units.iter().enumerate() {
                    write_vector_row(
                        &mut w,
                        &format!("{}#{}", doc.id, unit.index),
                        &domain,
                        "unit",
                        embs.row(i),
                    )?;
                }
            }
        }
    }
    if opts.kinds.contains(&ExportKind::Matching) {
        let domain = file_stem(&opts.corpus[0]);
        for pair in pairs {
            let z_q = params.forward(&pair.query)?;
            let z_p = params.forward(&pair.passage)?;
            let m = matching_representation(z_q.row(0), z_p.row(0))?;
            write_vector_row(
                &mut w,
                &format!("{}@{}", pair.query_id, pair.passage_id),
                &domain,
                "matching",
                &m,
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub struct SynthOpts {
    pub out: PathBuf,
    pub mode: SynthMode,
    pub queries: usize,
    pub distractors: usize,
    pub queries_per_passage: usize,
    pub signal_vocab: usize,
    pub distractor_vocab: usize,
    pub signal_words: usize,
    pub sentence_words: usize,
}

pub fn cmd_synth(opts: &SynthOpts, global: &GlobalOpts) -> Result<()> {
    let spec = SynthSpec {
        mode: opts.mode,
        queries: opts.queries,
        distractors: opts.distractors,
        queries_per_passage: opts.queries_per_passage,
        signal_vocab: if opts.signal_vocab == 0 {
            opts.queries * opts.signal_words
        } else {
            opts.signal_vocab
        },
        distractor_vocab: opts.distractor_vocab,
        signal_words: opts.signal_words,
        sentence_words: opts.sentence_words,
        seed: global.seed.unwrap_or(42),
    };
    let generated = synth::generate(&spec)?;
    synth::write(&generated, &opts.out)?;
    eprintln!(
        "wrote {} passages, {} queries -> {}",
        generated.corpus.len(),
        generated.queries.len(),
        opts.out.display()
    );
    Ok(())
}
