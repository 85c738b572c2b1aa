use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use berm_cli::commands::{self, ExportKind, GlobalOpts};
use berm_core::encoder::Precision;

/// Unit-aware dense-retrieval lab: segment passages into sentence units,
/// annotate the essential matching unit per training pair, train a small
/// dual encoder under balance/extraction constraints, then evaluate and
/// inspect the learned representations.
#[derive(Parser)]
#[command(name = "berm", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random choice (synth, sampling, training init).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for annotation, encoding, and diagnostics. Training
    /// itself is single-threaded so runs stay bitwise reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Float width for inference (training always runs in f64).
    #[arg(long, global = true, value_enum, default_value_t = PrecisionArg::F64)]
    precision: PrecisionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum KindArg {
    Text,
    Unit,
    Matching,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a corpus into sentence units with token-aligned spans.
    Segment(SegmentArgs),
    /// Label the essential matching unit of every positive pair.
    Annotate(AnnotateArgs),
    /// Train the dual encoder on annotated pairs.
    Train(TrainArgs),
    /// Encode, retrieve, and score a dataset.
    Eval(EvalArgs),
    /// Representation diagnostics and embedding export.
    Analyze(AnalyzeArgs),
    /// Generate a seeded synthetic dataset with known gold units.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    max_len: usize,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Weight of the reader score inside the hybrid score.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// reader.jsonl with answer-start distributions for QA-style data.
    #[arg(long)]
    reader: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    max_len: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// config.json; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Output directory for checkpoints and metrics.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// negatives.jsonl for the "file" negative-sampling mode.
    #[arg(long)]
    negatives: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Verify analytic gradients against finite differences before training.
    #[arg(long)]
    check_grads: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// nDCG cutoff.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Top-k hit-rate cutoff.
    #[arg(long, default_value_t = 20)]
    hit_k: usize,
    /// Write the ranked lists as TSV (query-id, passage-id, rank, score).
    #[arg(long)]
    run: Option<PathBuf>,
    /// Write the metrics report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Dataset name in the report (defaults to the corpus file stem).
    #[arg(long)]
    name: Option<String>,
    /// Another corpus.jsonl to compute Jaccard unigram overlap against.
    #[arg(long)]
    jaccard: Option<PathBuf>,
    /// Skip the check that qrels only reference loaded ids.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Repeatable; the first corpus pairs with the annotations, extras are
    /// exported only.
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    /// Write the diagnostics report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write representation vectors as TSV (id, domain, kind, components).
    #[arg(long)]
    export: Option<PathBuf>,
    /// Representation kinds to export.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KindArg::Text, KindArg::Unit, KindArg::Matching])]
    kinds: Vec<KindArg>,
    /// Maximum annotated pairs to sample for diagnostics.
    #[arg(long, default_value_t = 10_000)]
    sample: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthModeArg {
    /// Every query owns private signal words.
    Exclusive,
    /// Queries recombine a shared signal vocabulary (progression tuples).
    Compositional,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl, queries.jsonl, qrels.tsv, gold.tsv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SynthModeArg::Exclusive)]
    mode: SynthModeArg,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    /// Distractor sentences per passage.
    #[arg(long, default_value_t = 3)]
    distractors: usize,
    /// Queries sharing one passage, each targeting its own sentence.
    #[arg(long, default_value_t = 1)]
    queries_per_passage: usize,
    /// Signal vocabulary size; 0 means exactly queries * signal-words.
    #[arg(long, default_value_t = 0)]
    signal_vocab: usize,
    #[arg(long, default_value_t = 120)]
    distractor_vocab: usize,
    /// Signal words per query.
    #[arg(long, default_value_t = 3)]
    signal_words: usize,
    /// Words per distractor sentence.
    #[arg(long, default_value_t = 6)]
    sentence_words: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let global = GlobalOpts {
        seed: cli.seed,
        threads: cli.threads.max(1),
        precision: match cli.precision {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        },
    };
    let result = match cli.command {
        Command::Segment(args) => commands::cmd_segment(&commands::SegmentOpts {
            corpus: args.corpus,
            out: args.out,
            max_len: args.max_len,
        }),
        Command::Annotate(args) => commands::cmd_annotate(
            &commands::AnnotateOpts {
                corpus: args.corpus,
                queries: args.queries,
                qrels: args.qrels,
                out: args.out,
                delta: args.delta,
                k1: args.k1,
                b: args.b,
                reader: args.reader,
                max_len: args.max_len,
            },
            &global,
        ),
        Command::Train(args) => commands::cmd_train(
            &commands::TrainOpts {
                config: args.config,
                corpus: args.corpus,
                queries: args.queries,
                annotations: args.annotations,
                out: args.out,
                negatives: args.negatives,
                resume: args.resume,
                check_grads: args.check_grads,
            },
            &global,
        ),
        Command::Eval(args) => commands::cmd_eval(
            &commands::EvalOpts {
                checkpoint: args.checkpoint,
                corpus: args.corpus,
                queries: args.queries,
                qrels: args.qrels,
                k: args.k,
                hit_k: args.hit_k,
                run: args.run,
                report: args.report,
                name: args.name,
                jaccard: args.jaccard,
                lenient: args.lenient,
            },
            &global,
        ),
        Command::Analyze(args) => commands::cmd_analyze(
            &commands::AnalyzeOpts {
                checkpoint: args.checkpoint,
                annotations: args.annotations,
                corpus: args.corpus,
                queries: args.queries,
                report: args.report,
                export: args.export,
                kinds: args
                    .kinds
                    .iter()
                    .map(|k| match k {
                        KindArg::Text => ExportKind::Text,
                        KindArg::Unit => ExportKind::Unit,
                        KindArg::Matching => ExportKind::Matching,
                    })
                    .collect(),
                sample: args.sample,
            },
            &global,
        ),
        Command::Synth(args) => commands::cmd_synth(
            &commands::SynthOpts {
                out: args.out,
                mode: match args.mode {
                    SynthModeArg::Exclusive => berm_cli::synth::SynthMode::Exclusive,
                    SynthModeArg::Compositional => berm_cli::synth::SynthMode::Compositional,
                },
                queries: args.queries,
                distractors: args.distractors,
                queries_per_passage: args.queries_per_passage,
                signal_vocab: args.signal_vocab,
                distractor_vocab: args.distractor_vocab,
                signal_words: args.signal_words,
                sentence_words: args.sentence_words,
            },
            &global,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
