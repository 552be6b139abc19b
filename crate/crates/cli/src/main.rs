//! `cuiwb`: batch front end for the annotation workbench.
//!
//! Exit codes: 0 on success, 1 on failures and on lint findings of error
//! severity, 2 on usage errors. `--format json` prints the same body the
//! corresponding HTTP endpoint returns.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cuiwb_core::agreement::agreement_report;
use cuiwb_core::corpus::{corpus_stats, import_corpus, lint_corpus, Corpus, Severity};
use cuiwb_core::eval_e2e::{corpus_report, E2EMode, MatchMode};
use cuiwb_core::eval_norm::{norm_report, GoldSpan};
use cuiwb_core::formats::{parse_e2e_jsonl, parse_pred_tsv, parse_spans_tsv, resolve_gold_spans, system_id_for};
use cuiwb_core::render;
use cuiwb_core::suggestion::suggest;
use cuiwb_core::vocabulary::{build_index, parse_vocab_file, SemanticTypeSource, VocabularyIndex};
use cuiwb_service::{ServiceConfig, Store};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cuiwb", version, about = "CUI annotation workbench")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Vocabulary file checks.
    #[command(subcommand)]
    Vocab(VocabCommand),
    /// Rank concepts for a text query.
    Suggest {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        query: String,
        /// Maximum number of partial matches.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u16).range(1..=100))]
        k: u16,
    },
    /// Corpus validation and statistics.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Span and CUI agreement between two annotators.
    Agreement {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        corpus: PathBuf,
    },
    /// Normalization and end-to-end evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Store auto-tag proposals for one document.
    Autotag {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        store: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "CUIWB_VOCAB")]
        vocab: PathBuf,
        #[arg(long, env = "CUIWB_STORE")]
        store: PathBuf,
        /// Port on localhost; 0 picks a free one.
        #[arg(long, env = "CUIWB_PORT", default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum VocabCommand {
    /// Parse a vocabulary file and print index statistics.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Run the lints; fails when any finding has error severity.
    Validate {
        #[arg(long)]
        vocab: PathBuf,
        corpus: PathBuf,
    },
    /// Span and CUI counts per document and annotator.
    Stats { corpus: PathBuf },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Score normalization runs by subset.
    Norm {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// One file per system; the file name is the system id.
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        /// Minimum gold spans for a semantic type row.
        #[arg(long, default_value_t = 50)]
        semtype_min: usize,
        /// Vocabulary for semantic types and the not-direct-match subset.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Corpus supplying span text for files without a text column.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Score span-and-CUI predictions against a corpus.
    E2e {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "framework", value_parser = parse_mode)]
        mode: E2EMode,
        #[arg(long = "match", default_value = "exact", value_parser = parse_match)]
        match_mode: MatchMode,
        #[arg(long, default_value_t = 50)]
        semtype_min: usize,
        /// Vocabulary for semantic type rows.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<E2EMode, String> {
    s.parse()
}

fn parse_match(s: &str) -> Result<MatchMode, String> {
    s.parse()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn load_index(path: &Path) -> Result<VocabularyIndex> {
    let concepts = parse_vocab_file(open(path)?).with_context(|| format!("vocabulary {}", path.display()))?;
    build_index(concepts).with_context(|| format!("vocabulary {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    import_corpus(&bytes).with_context(|| format!("corpus {}", path.display()))
}

fn load_spans(path: &Path, corpus: Option<&Corpus>) -> Result<Vec<GoldSpan>> {
    let name = path.display().to_string();
    let records = parse_spans_tsv(open(path)?, &name)?;
    Ok(resolve_gold_spans(records, corpus)?)
}

fn emit<T: Serialize>(format: Format, value: &T, table: impl FnOnce(&T) -> String) -> Result<()> {
    let text = match format {
        Format::Table => table(value),
        Format::Json => serde_json::to_string_pretty(value)? + "\n",
    };
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let format = cli.format;
    match cli.command {
        Command::Vocab(VocabCommand::Check { input }) => {
            let idx = load_index(&input)?;
            emit(format, &idx.stats(), render::vocab_stats)?;
        }
        Command::Suggest { vocab, query, k } => {
            let idx = load_index(&vocab)?;
            emit(format, &suggest(&idx, &query, k as usize), render::suggestions)?;
        }
        Command::Corpus(CorpusCommand::Validate { vocab, corpus }) => {
            let idx = load_index(&vocab)?;
            let findings = lint_corpus(&load_corpus(&corpus)?, &idx);
            emit(format, &findings, |f| render::lint_findings(f))?;
            if findings.iter().any(|f| f.severity == Severity::Error) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Corpus(CorpusCommand::Stats { corpus }) => {
            emit(format, &corpus_stats(&load_corpus(&corpus)?), render::corpus_stats)?;
        }
        Command::Agreement { a, b, corpus } => {
            let report = agreement_report(&load_corpus(&corpus)?, &a, &b)?;
            emit(format, &report, render::agreement)?;
        }
        Command::Eval(EvalCommand::Norm {
            train,
            gold,
            pred,
            semtype_min,
            vocab,
            corpus,
        }) => {
            let corpus = corpus.as_deref().map(load_corpus).transpose()?;
            let idx = vocab.as_deref().map(load_index).transpose()?;
            let train = load_spans(&train, corpus.as_ref())?;
            let gold = load_spans(&gold, corpus.as_ref())?;
            let runs = pred
                .iter()
                .map(|p| {
                    let id = system_id_for(&p.display().to_string());
                    parse_pred_tsv(open(p)?, &id).with_context(|| format!("predictions {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let report = norm_report(&train, &gold, &runs, idx.as_ref(), semtype_min)?;
            emit(format, &report, render::norm_report)?;
        }
        Command::Eval(EvalCommand::E2e {
            gold,
            pred,
            mode,
            match_mode,
            semtype_min,
            vocab,
        }) => {
            let corpus = load_corpus(&gold)?;
            let preds = parse_e2e_jsonl(open(&pred)?, &pred.display().to_string())?;
            let idx = vocab.as_deref().map(load_index).transpose()?;
            let report = corpus_report(
                &corpus,
                &preds,
                mode,
                match_mode,
                idx.as_ref().map(|i| i as &dyn SemanticTypeSource),
                semtype_min,
            );
            emit(format, &report, render::e2e_report)?;
        }
        Command::Autotag { vocab, doc, store } => {
            let idx = load_index(&vocab)?;
            let store = Store::open(&store, &vocab).with_context(|| format!("store {}", store.display()))?;
            let runtime = tokio::runtime::Runtime::new()?;
            let proposals = runtime.block_on(store.autotag(&doc, &idx, chrono::Utc::now()))?;
            emit(format, &proposals, |p| render::annotations(p))?;
        }
        Command::Serve { vocab, store, port } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(cuiwb_service::serve(ServiceConfig { vocab, store, port }, |addr| {
                println!("listening on http://{addr}");
                let _ = std::io::stdout().flush();
            }))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
