//! The `cm` command line. Every analysis goes through [`crate::analysis`],
//! the same code the service runs, so equal inputs give equal files.

pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use cm_core::classify::{self, CodingSession, Strategy};
use cm_core::cooccurrence::{term_frequencies, time_series, ContextUnit, CoocOptions, Granularity, Measure};
use cm_core::corpus::{
    deduplicate, import_csv_reader, import_text_dir, tag_entities, Document, EntityKind, FieldTarget, Gazetteer,
    ImportMapping, ImportReport,
};
use cm_core::interchange::{atomic_write, qdpx_bytes, write_corpus_csv, write_eval_csv, write_labels_csv, QdpxProject};
use cm_core::numfmt::sig9;
use cm_core::pipeline::{build_dtm, load_term_list, AnalysisParams};
use cm_core::topics::{
    coherence_umass, filter_by_topic, highlight, load_model, save_model, top_words, topic_by_metadata, TopicLabels,
};

use crate::analysis::{self, LdaSettings};
use crate::error::{Error, Result};
use crate::server::jobs::ExportFormat;

#[derive(Parser, Debug)]
#[command(
    name = "cm",
    version,
    about = "Content-analysis workbench: corpus import, co-occurrence, topic models, coding and exchange",
    arg_required_else_help = true,
    propagate_version = true
)]
pub struct Cli {
    /// Preset file (default: ./cm.toml when present).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read CSV/TSV or a directory of .txt files into a corpus file.
    Import(ImportArgs),
    /// Group near-duplicate documents.
    Dedup(DedupArgs),
    /// Term frequencies, or one term's counts over time.
    Freq(FreqArgs),
    /// Ranked co-occurring term pairs.
    Cooc(CoocArgs),
    /// Fit an LDA topic model.
    Lda(LdaArgs),
    /// Inspect, label and query a fitted topic model.
    #[command(subcommand, arg_required_else_help = true)]
    Topics(TopicsCommand),
    /// Naive Bayes coding: train, cross-validate, simulate active learning.
    #[command(subcommand, arg_required_else_help = true)]
    Classify(ClassifyCommand),
    /// Write corpus CSV, labels CSV, θ/φ CSV or a QDPX project.
    Export(ExportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArg {
    /// Corpus written by `cm import` (.json) or a corpus CSV.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
}

/// Preprocessing flags. Unset flags keep the values of `--params` or the
/// defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Full parameter set as JSON; the flags below override it.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub ngram: Option<u8>,
    #[arg(long)]
    pub min_char: Option<usize>,
    #[arg(long)]
    pub max_char: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    pub lowercase: Option<bool>,
    #[arg(long)]
    pub remove_stopwords: bool,
    #[arg(long, value_name = "LANG")]
    pub stopword_language: Option<String>,
    #[arg(long)]
    pub remove_numbers: bool,
    /// File with one blacklisted term per line.
    #[arg(long, value_name = "FILE")]
    pub blacklist: Option<PathBuf>,
    /// A single blacklisted term; repeatable.
    #[arg(long, value_name = "TERM")]
    pub blacklist_term: Vec<String>,
    /// Blacklist every tagged surface of these entity kinds, e.g. LOCATION.
    #[arg(long, value_name = "KIND", value_delimiter = ',')]
    pub blacklist_entities: Vec<String>,
    /// File with one whitelisted term per line; only these survive.
    #[arg(long, value_name = "FILE")]
    pub whitelist: Option<PathBuf>,
    #[arg(long)]
    pub prune_min_df: Option<f64>,
    #[arg(long)]
    pub prune_max_df: Option<f64>,
    #[arg(long)]
    pub consolidate_entities: bool,
}

impl ParamArgs {
    /// The parameter set and the entity kinds to blacklist.
    pub fn resolve(&self) -> Result<(AnalysisParams, BTreeSet<EntityKind>)> {
        let mut p = match &self.params {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::BadRequest(format!("{}: {e}", path.display())))?;
                serde_json::from_slice(&bytes).map_err(|e| Error::BadRequest(format!("{}: {e}", path.display())))?
            }
            None => AnalysisParams::default(),
        };
        if let Some(v) = self.ngram {
            p.ngram = v;
        }
        if let Some(v) = self.min_char {
            p.min_char = v;
        }
        if let Some(v) = self.max_char {
            p.max_char = v;
        }
        if let Some(v) = self.lowercase {
            p.lowercase = v;
        }
        p.remove_stopwords |= self.remove_stopwords;
        if let Some(v) = &self.stopword_language {
            p.stopword_language = v.clone();
        }
        p.remove_numbers |= self.remove_numbers;
        if let Some(path) = &self.blacklist {
            p.blacklist.extend(load_term_list(path)?);
        }
        p.blacklist.extend(self.blacklist_term.iter().cloned());
        if let Some(path) = &self.whitelist {
            p.whitelist = Some(load_term_list(path)?);
        }
        if let Some(v) = self.prune_min_df {
            p.prune_min_df = v;
        }
        if let Some(v) = self.prune_max_df {
            p.prune_max_df = v;
        }
        p.consolidate_entities |= self.consolidate_entities;
        p.validate()?;
        let kinds = self
            .blacklist_entities
            .iter()
            .map(|k| k.parse::<EntityKind>())
            .collect::<std::result::Result<_, _>>()?;
        Ok((p, kinds))
    }
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    /// CSV/TSV file, or a directory of .txt files with --text-dir.
    pub input: PathBuf,
    /// Column mapping `COLUMN=TARGET`, TARGET one of id, title, date, body,
    /// metadata:<field>. Without any, the corpus CSV layout is assumed.
    #[arg(long = "map", value_name = "COLUMN=TARGET")]
    pub map: Vec<String>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// chrono format of the date column.
    #[arg(long)]
    pub date_format: Option<String>,
    /// Treat INPUT as a directory of plain-text files.
    #[arg(long)]
    pub text_dir: bool,
    /// Gazetteer lines `surface<TAB>KIND` for entity tagging.
    #[arg(long, value_name = "FILE")]
    pub gazetteer: Option<PathBuf>,
    /// Output corpus: .json keeps entity tags, .csv is the corpus CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DedupArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// Write the groups as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write the corpus with only group representatives kept.
    #[arg(long, value_name = "FILE")]
    pub keep_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FreqArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 50)]
    pub top: usize,
    /// Report this term's counts per period instead.
    #[arg(long, value_name = "TERM")]
    pub series: Option<String>,
    #[arg(long, default_value = "year")]
    pub granularity: Granularity,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoocArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "dice")]
    pub measure: Measure,
    #[arg(long, default_value = "sentence")]
    pub unit: ContextUnit,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LdaArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub k: usize,
    /// Default 50/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Default 0.01.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gibbs sweeps, default 1000.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Default half the sweeps, at most 500.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Model directory; holds theta.csv and phi.csv among others.
    #[arg(long, default_value = "model", value_name = "DIR")]
    pub model_dir: PathBuf,
    /// Extra copy of θ.
    #[arg(long, value_name = "FILE")]
    pub theta: Option<PathBuf>,
    /// Extra copy of φ.
    #[arg(long, value_name = "FILE")]
    pub phi: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArg {
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum TopicsCommand {
    /// Top words per topic ranked by relevance.
    Show {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// 1 ranks by φ alone; lower values favour topic-specific terms.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Attach a label to a topic; earlier labels stay in the history.
    Label {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        topic: usize,
        #[arg(long)]
        label: String,
        #[arg(long, default_value = "cli")]
        author: String,
    },
    /// Documents with at least `min-share` of a topic.
    Filter {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        topic: usize,
        #[arg(long, default_value_t = 0.5)]
        min_share: f64,
    },
    /// Mean topic shares per metadata value.
    ByMeta {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        field: String,
    },
    /// UMass coherence of each topic's top words.
    Coherence {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Character spans of a document's tokens assigned to a topic.
    Highlight {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        topic: usize,
        #[arg(long, default_value_t = 0.0)]
        min_weight: f64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct LabelsArg {
    /// `doc_id,code_id[,author,timestamp]` CSV.
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    /// Codebook order; default the sorted label values.
    #[arg(long, value_delimiter = ',')]
    pub codes: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum ClassifyCommand {
    /// Train on labeled documents and predict the rest.
    Train {
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        labels: LabelsArg,
        /// Write the model as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Write `doc_id,code,probability` for unlabeled documents.
        #[arg(long, value_name = "FILE")]
        predictions: Option<PathBuf>,
    },
    /// Stratified k-fold precision, recall and F1.
    Eval {
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        labels: LabelsArg,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the report as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Write the per-class table as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Learning curve of an active-learning strategy against gold codes.
    Simulate {
        #[command(flatten)]
        corpus: CorpusArg,
        #[command(flatten)]
        params: ParamArgs,
        /// Metadata field holding the gold code.
        #[arg(long, conflicts_with = "gold", required_unless_present = "gold")]
        gold_field: Option<String>,
        /// Gold labels CSV.
        #[arg(long, value_name = "FILE")]
        gold: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        codes: Vec<String>,
        /// entropy, margin, least_confidence or random:<seed>.
        #[arg(long, default_value = "entropy")]
        strategy: Strategy,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write `labels,accuracy` CSV.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// corpus-csv, labels-csv, topics-csv or qdpx.
    pub format: ExportFormat,
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub codes: Vec<String>,
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    /// Seed of the deterministic QDPX guids.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// QDPX project name.
    #[arg(long)]
    pub name: Option<String>,
    /// Output file; a directory for topics-csv.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "CM_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "CM_DATA_DIR", default_value = "cm-data")]
    pub data_dir: PathBuf,
    /// Concurrent jobs; default the number of CPUs.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Parses `argv` (presets from cm.toml applied) and runs it. Returns the exit
/// code: 0 success, 2 usage error, 1 runtime failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let command = Cli::command();
    let argv = match config::locate(&argv) {
        Some(path) => match config::load(&path) {
            Ok(table) => {
                let (argv, warnings) = config::apply(&command, argv, &table);
                for w in warnings {
                    eprintln!("cm: warning: {w}");
                }
                argv
            }
            Err(e) => {
                eprintln!("cm: error: {e}");
                return 2;
            }
        },
        None => argv,
    };
    let cli = match command.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cm: error: {e}");
            1
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    atomic_write(path, bytes)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn echo_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

fn read_gazetteer(path: &Path) -> Result<Gazetteer> {
    Ok(Gazetteer::load(path)?)
}

/// A labels CSV with its optional author and timestamp columns.
fn read_label_records(path: &Path) -> Result<Vec<(String, String, String, chrono::DateTime<chrono::Utc>)>> {
    let bad = |e: &dyn std::fmt::Display| Error::BadRequest(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    let header = rdr.headers().map_err(|e| bad(&e))?.clone();
    let col = |n: &str| header.iter().position(|h| h == n);
    let (doc, code) = match (col("doc_id"), col("code_id")) {
        (Some(d), Some(c)) => (d, c),
        _ => return Err(bad(&"needs doc_id and code_id columns")),
    };
    let (author, ts) = (col("author"), col("timestamp"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(&e))?;
        let get = |i: Option<usize>| i.and_then(|i| rec.get(i)).unwrap_or("").to_string();
        let stamp = match get(ts) {
            s if s.is_empty() => chrono::DateTime::UNIX_EPOCH,
            s => chrono::DateTime::parse_from_rfc3339(&s).map_err(|e| bad(&e))?.to_utc(),
        };
        out.push((get(Some(doc)), get(Some(code)), get(author), stamp));
    }
    Ok(out)
}

fn label_map(path: &Path) -> Result<BTreeMap<String, String>> {
    Ok(read_label_records(path)?.into_iter().map(|(d, c, _, _)| (d, c)).collect())
}

fn codes_opt(codes: &[String]) -> Option<&[String]> {
    (!codes.is_empty()).then_some(codes)
}

fn prepared_for(corpus: &[Document], params: &ParamArgs) -> Result<analysis::Prepared> {
    let (p, kinds) = params.resolve()?;
    analysis::prepare(corpus, &analysis::effective_params(corpus, &p, &kinds))
}

fn execute(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Import(a) => import(a, json),
        Command::Dedup(a) => {
            let corpus = analysis::load_corpus(&a.corpus.corpus)?;
            let groups = deduplicate(&corpus, a.threshold)?;
            if let Some(out) = &a.out {
                write_file(out, &serde_json::to_vec_pretty(&groups)?)?;
            }
            if let Some(out) = &a.keep_out {
                let dropped: BTreeSet<&str> = groups
                    .iter()
                    .flat_map(|g| g.ids().filter(move |id| *id != g.representative))
                    .collect();
                let kept: Vec<Document> = corpus.iter().filter(|d| !dropped.contains(d.id.as_str())).cloned().collect();
                write_corpus(out, &kept)?;
                eprintln!("kept {} of {} documents", kept.len(), corpus.len());
            }
            if json {
                return print_json(&groups);
            }
            println!("{} duplicate groups", groups.len());
            for g in &groups {
                let members: Vec<String> =
                    g.members.iter().map(|m| format!("{} ({})", m.id, sig9(m.similarity))).collect();
                println!("{}: {}", g.representative, members.join(", "));
            }
            Ok(())
        }
        Command::Freq(a) => {
            let corpus = analysis::load_corpus(&a.corpus.corpus)?;
            let prepared = prepared_for(&corpus, &a.params)?;
            if let Some(term) = &a.series {
                let series = time_series(&corpus, &prepared.vocab, term, a.granularity)?;
                let mut csv = String::from("period,count,doc_count\n");
                for p in &series.points {
                    csv.push_str(&format!("{},{},{}\n", p.period, p.count, p.doc_count));
                }
                if let Some(out) = &a.out {
                    write_file(out, csv.as_bytes())?;
                }
                if series.excluded > 0 {
                    eprintln!("{} undated documents left out", series.excluded);
                }
                if json {
                    return print_json(&series);
                }
                print!("{csv}");
                return Ok(());
            }
            let freqs = term_frequencies(&prepared.dtm, a.top);
            let csv = analysis::frequencies_csv(&freqs);
            if let Some(out) = &a.out {
                write_file(out, &csv)?;
            }
            if json {
                print_json(&freqs)
            } else {
                std::io::stdout().write_all(&csv)?;
                Ok(())
            }
        }
        Command::Cooc(a) => {
            let corpus = analysis::load_corpus(&a.corpus.corpus)?;
            let prepared = prepared_for(&corpus, &a.params)?;
            let options = CoocOptions { unit: a.unit, measure: a.measure, min_pair_count: a.min_count, top_n: a.top_n };
            let result = analysis::cooc(&corpus, &prepared, &options)?;
            let csv = analysis::cooc_csv(&result)?;
            if let Some(out) = &a.out {
                write_file(out, &csv)?;
            }
            if json {
                print_json(&result)
            } else {
                if a.out.is_none() {
                    std::io::stdout().write_all(&csv)?;
                } else {
                    println!("{} pairs", result.pairs.len());
                }
                Ok(())
            }
        }
        Command::Lda(a) => lda(a, json),
        Command::Topics(t) => topics(t, json),
        Command::Classify(c) => classify_cmd(c, json),
        Command::Export(a) => export(a),
        Command::Serve(a) => {
            let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(2, |n| n.get()));
            let config = crate::server::ServeConfig { port: a.port, data_dir: a.data_dir, workers };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(config)).map_err(|e| Error::Internal(e.to_string()))
        }
    }
}

fn write_corpus(path: &Path, corpus: &[Document]) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut buf = Vec::new();
        write_corpus_csv(corpus, &mut buf)?;
        write_file(path, &buf)
    } else {
        write_file(path, &analysis::corpus_json(corpus)?)
    }
}

fn import(a: ImportArgs, json: bool) -> Result<()> {
    let (mut docs, report) = if a.text_dir {
        let docs = import_text_dir(&a.input)?;
        let n = docs.len();
        (docs, ImportReport { rows: n, accepted: n, rejected: Vec::new() })
    } else {
        let bytes = std::fs::read(&a.input).map_err(|e| Error::BadRequest(format!("{}: {e}", a.input.display())))?;
        let mut mapping = if a.map.is_empty() {
            let delim = a.delimiter.unwrap_or(',');
            let mut rdr = csv::ReaderBuilder::new().delimiter(delim as u8).from_reader(bytes.as_slice());
            let header = rdr.headers().map_err(|e| Error::BadRequest(e.to_string()))?.clone();
            let fields: Vec<&str> = header.iter().filter(|h| !["id", "title", "date", "body"].contains(h)).collect();
            ImportMapping::for_corpus_export(fields)
        } else {
            let mut m = ImportMapping::default();
            for spec in &a.map {
                let (col, target) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::BadRequest(format!("--map {spec:?}: expected COLUMN=TARGET")))?;
                m = m.map(col, target.parse::<FieldTarget>()?);
            }
            m
        };
        if let Some(d) = a.delimiter {
            mapping = mapping.delimiter(d);
        }
        if let Some(f) = &a.date_format {
            mapping = mapping.date_format(f);
        }
        import_csv_reader(bytes.as_slice(), &mapping)?
    };
    if let Some(g) = &a.gazetteer {
        let gazetteer = read_gazetteer(g)?;
        docs = docs.into_iter().map(|d| tag_entities(d, &gazetteer)).collect();
    }
    write_corpus(&a.out, &docs)?;
    if json {
        print_json(&report)
    } else {
        print!("{report}");
        Ok(())
    }
}

fn lda(a: LdaArgs, json: bool) -> Result<()> {
    let settings = LdaSettings {
        k: a.k,
        alpha: a.alpha,
        beta: a.beta,
        iterations: a.iterations,
        burn_in: a.burn_in,
        seed: a.seed,
    };
    let cfg = settings.config()?;
    echo_seed(cfg.seed);
    let corpus = analysis::load_corpus(&a.corpus.corpus)?;
    let prepared = prepared_for(&corpus, &a.params)?;
    let step = (cfg.iterations / 10).max(1);
    let model = analysis::fit(&prepared, &cfg, |p| {
        if p.sweep % step == 0 || p.sweep == p.total {
            eprintln!("sweep {}/{}  log-likelihood {}", p.sweep, p.total, sig9(p.log_likelihood));
        }
        ControlFlow::Continue(())
    })?;
    for w in model.warnings() {
        eprintln!("cm: warning: {w}");
    }
    save_model(&model, &TopicLabels::new(), &a.model_dir)?;
    if let Some(p) = &a.theta {
        write_file(p, &analysis::theta_csv(&model)?)?;
    }
    if let Some(p) = &a.phi {
        write_file(p, &analysis::phi_csv(&model)?)?;
    }
    let summary = serde_json::json!({
        "model_dir": a.model_dir,
        "config": cfg,
        "n_docs": model.n_docs(),
        "n_terms": model.n_terms(),
        "final_log_likelihood": model.log_likelihood_trace().last(),
    });
    if json {
        print_json(&summary)
    } else {
        println!(
            "fitted K={} on {} documents, {} terms; model in {}",
            cfg.k,
            model.n_docs(),
            model.n_terms(),
            a.model_dir.display()
        );
        Ok(())
    }
}

fn topics(cmd: TopicsCommand, json: bool) -> Result<()> {
    match cmd {
        TopicsCommand::Show { model, n, lambda } => {
            let (m, labels) = load_model(&model.model)?;
            let n = n.min(m.n_terms());
            let rows = (0..m.n_topics())
                .map(|k| Ok((k, labels.get(k).map(str::to_string), top_words(&m, k, n, lambda)?)))
                .collect::<Result<Vec<_>>>()?;
            if json {
                let v: Vec<_> = rows
                    .iter()
                    .map(|(k, l, w)| serde_json::json!({ "topic": k, "label": l, "top_words": w }))
                    .collect();
                return print_json(&v);
            }
            for (k, label, words) in rows {
                let terms: Vec<&str> = words.iter().map(|w| w.term.as_str()).collect();
                match label {
                    Some(l) => println!("{k} [{l}]: {}", terms.join(" ")),
                    None => println!("{k}: {}", terms.join(" ")),
                }
            }
            Ok(())
        }
        TopicsCommand::Label { model, topic, label, author } => {
            let (m, mut labels) = load_model(&model.model)?;
            let entry = labels.label_topic(m.n_topics(), topic, &label, &author)?;
            save_model(&m, &labels, &model.model)?;
            if json {
                print_json(&entry)
            } else {
                println!("topic {topic} labelled {label:?}");
                Ok(())
            }
        }
        TopicsCommand::Filter { model, topic, min_share } => {
            let (m, _) = load_model(&model.model)?;
            let docs = filter_by_topic(&m, topic, min_share)?;
            if json {
                return print_json(&docs);
            }
            for d in docs {
                println!("{}\t{}", d.id, sig9(d.share));
            }
            Ok(())
        }
        TopicsCommand::ByMeta { model, corpus, field } => {
            let (m, _) = load_model(&model.model)?;
            let corpus = analysis::load_corpus(&corpus.corpus)?;
            let groups = topic_by_metadata(&m, &corpus, &field)?;
            if json {
                return print_json(&groups);
            }
            let header: Vec<String> = (0..m.n_topics()).map(|k| format!("topic_{k}")).collect();
            println!("group\tsize\t{}", header.join("\t"));
            for g in groups {
                let cells: Vec<String> = g.mean_theta.iter().map(|&x| sig9(x)).collect();
                println!("{}\t{}\t{}", g.group, g.size, cells.join("\t"));
            }
            Ok(())
        }
        TopicsCommand::Coherence { model, corpus, n } => {
            let (m, _) = load_model(&model.model)?;
            let corpus = analysis::load_corpus(&corpus.corpus)?;
            let dtm = build_dtm(&corpus, m.vocab());
            let c = coherence_umass(&m, &dtm, n.min(m.n_terms()))?;
            if json {
                return print_json(&c);
            }
            for (k, s) in c.scores.iter().enumerate() {
                println!("{k}\t{}", sig9(*s));
            }
            println!("mean\t{}", sig9(c.mean()));
            if !c.skipped.is_empty() {
                eprintln!("{} word pairs skipped (conditioning word in no document)", c.skipped.len());
            }
            Ok(())
        }
        TopicsCommand::Highlight { model, corpus, doc, topic, min_weight } => {
            let (m, _) = load_model(&model.model)?;
            let corpus = analysis::load_corpus(&corpus.corpus)?;
            let dtm = build_dtm(&corpus, m.vocab());
            let spans = highlight(&m, &dtm, &doc, topic, min_weight)?;
            if json {
                return print_json(&spans);
            }
            let body = corpus.iter().find(|d| d.id == doc).map(|d| d.body.as_str()).unwrap_or("");
            let chars: Vec<char> = body.chars().collect();
            for s in spans {
                let text: String = chars[s.start..s.end].iter().collect();
                println!("{}..{}\t{}\t{text}", s.start, s.end, sig9(s.weight));
            }
            Ok(())
        }
    }
}

fn classify_cmd(cmd: ClassifyCommand, json: bool) -> Result<()> {
    match cmd {
        ClassifyCommand::Train { corpus, params, labels, out, predictions } => {
            let corpus = analysis::load_corpus(&corpus.corpus)?;
            let prepared = prepared_for(&corpus, &params)?;
            let map = label_map(&labels.labels)?;
            let codebook = analysis::codebook_for(codes_opt(&labels.codes), &map)?;
            let model = classify::train(&prepared.dtm, &codebook, &map)?;
            if let Some(p) = &out {
                write_file(p, &serde_json::to_vec_pretty(&model)?)?;
            }
            let mut preds = Vec::new();
            for d in corpus.iter().filter(|d| !map.contains_key(&d.id)) {
                let p = classify::predict(&model, &prepared.dtm, &d.id)?;
                let best = p.posterior.iter().copied().fold(0.0, f64::max);
                preds.push((d.id.clone(), p.code, best));
            }
            let mut csv = String::from("doc_id,code,probability\n");
            for (d, c, p) in &preds {
                csv.push_str(&format!("{d},{c},{}\n", sig9(*p)));
            }
            if let Some(p) = &predictions {
                write_file(p, csv.as_bytes())?;
            }
            if json {
                let v: Vec<_> = preds
                    .iter()
                    .map(|(d, c, p)| serde_json::json!({ "doc_id": d, "code": c, "probability": p }))
                    .collect();
                print_json(&v)
            } else {
                println!("trained on {} labels over {} codes; {} documents predicted", map.len(), codebook.len(), preds.len());
                Ok(())
            }
        }
        ClassifyCommand::Eval { corpus, params, labels, folds, seed, out, csv } => {
            echo_seed(seed);
            let corpus = analysis::load_corpus(&corpus.corpus)?;
            let prepared = prepared_for(&corpus, &params)?;
            let map = label_map(&labels.labels)?;
            let codebook = analysis::codebook_for(codes_opt(&labels.codes), &map)?;
            let report = classify::evaluate(&prepared.dtm, &codebook, &map, folds, seed)?;
            if let Some(p) = &out {
                let mut b = serde_json::to_vec_pretty(&report)?;
                b.push(b'\n');
                write_file(p, &b)?;
            }
            let mut table = Vec::new();
            write_eval_csv(&report, &mut table)?;
            if let Some(p) = &csv {
                write_file(p, &table)?;
            }
            if json {
                print_json(&report)
            } else {
                std::io::stdout().write_all(&table)?;
                println!("accuracy {}", sig9(report.accuracy));
                Ok(())
            }
        }
        ClassifyCommand::Simulate { corpus, params, gold_field, gold, codes, strategy, budget, seed, out } => {
            echo_seed(seed);
            let corpus = analysis::load_corpus(&corpus.corpus)?;
            let prepared = prepared_for(&corpus, &params)?;
            let gold = match (gold, gold_field) {
                (Some(p), _) => label_map(&p)?,
                (None, Some(f)) => analysis::gold_from_field(&corpus, &f)?,
                (None, None) => unreachable!("clap requires one"),
            };
            let codebook = analysis::codebook_for(codes_opt(&codes), &gold)?;
            let curve = classify::simulate_active_learning(&prepared.dtm, &codebook, &gold, strategy, budget, seed)?;
            let csv = analysis::curve_csv(&curve);
            if let Some(p) = &out {
                write_file(p, &csv)?;
            }
            if json {
                print_json(&curve)
            } else {
                std::io::stdout().write_all(&csv)?;
                Ok(())
            }
        }
    }
}

fn export(a: ExportArgs) -> Result<()> {
    let need_corpus = || {
        a.corpus
            .as_deref()
            .ok_or_else(|| Error::BadRequest(format!("{:?} export needs --corpus", a.format)))
            .and_then(analysis::load_corpus)
    };
    let session = || -> Result<CodingSession> {
        let path = a.labels.as_deref().ok_or_else(|| Error::BadRequest("this export needs --labels".into()))?;
        let records = read_label_records(path)?;
        let map: BTreeMap<String, String> = records.iter().map(|(d, c, _, _)| (d.clone(), c.clone())).collect();
        let codebook = analysis::codebook_for(codes_opt(&a.codes), &map)?;
        let mut s = CodingSession::new(codebook, Strategy::Entropy, map.keys().cloned());
        for (d, c, author, ts) in records {
            s.record_label_at(&d, &c, &author, true, ts)?;
        }
        Ok(s)
    };
    match a.format {
        ExportFormat::CorpusCsv => {
            let mut buf = Vec::new();
            write_corpus_csv(&need_corpus()?, &mut buf)?;
            write_file(&a.out, &buf)?;
        }
        ExportFormat::LabelsCsv => {
            let mut buf = Vec::new();
            write_labels_csv(&session()?, &mut buf)?;
            write_file(&a.out, &buf)?;
        }
        ExportFormat::TopicsCsv => {
            let dir = a.model.as_deref().ok_or_else(|| Error::BadRequest("topics-csv export needs --model".into()))?;
            let (m, _) = load_model(dir)?;
            std::fs::create_dir_all(&a.out)?;
            write_file(&a.out.join("theta.csv"), &analysis::theta_csv(&m)?)?;
            write_file(&a.out.join("phi.csv"), &analysis::phi_csv(&m)?)?;
        }
        ExportFormat::Qdpx => {
            echo_seed(a.seed);
            let corpus = need_corpus()?;
            let name = a.name.clone().unwrap_or_else(|| "cm export".to_string());
            let project = if a.labels.is_some() {
                let s = session()?;
                QdpxProject::from_coding(name, a.seed, &corpus, &s.codebook, &s.label_map())?
            } else {
                let empty = classify::Codebook { codes: Vec::new() };
                QdpxProject::from_coding(name, a.seed, &corpus, &empty, &BTreeMap::new())?
            };
            write_file(&a.out, &qdpx_bytes(&project)?)?;
        }
    }
    eprintln!("wrote {}", a.out.display());
    Ok(())
}
