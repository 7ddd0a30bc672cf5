//! CSV exports and a REFI-QDA (QDPX) subset.
//!
//! All writers use LF line endings and RFC 4180 quoting, and every exported
//! file is written atomically: the bytes go to a temporary sibling that is
//! then renamed over the target.

mod qdpx;

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::path::Path;

use chrono::SecondsFormat;
use thiserror::Error;

use crate::classify::{CodingSession, EvalReport};
use crate::cooccurrence::CooccurrenceResult;
use crate::corpus::Document;
use crate::numfmt::sig9;
use crate::topics::{write_phi_csv, write_theta_csv, TopicError, TopicModel};

pub use qdpx::{export_qdpx, guid, import_qdpx, qdpx_bytes, read_qdpx, QdpxCode, QdpxImport, QdpxProject, QdpxSelection, QdpxSource};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("metadata field {0:?} collides with a fixed column")]
    ColumnClash(String),
    #[error("missing project.qde")]
    MissingProjectQde,
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("selection refers to unknown code {0}")]
    DanglingCodeRef(String),
    #[error("invalid project at {guid}: {message}")]
    Invalid { guid: String, message: String },
    #[error("zip: {0}")]
    Zip(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, InterchangeError>;

impl From<csv::Error> for InterchangeError {
    fn from(e: csv::Error) -> Self {
        InterchangeError::Csv(e.to_string())
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> io::Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

const FIXED_COLUMNS: [&str; 4] = ["id", "title", "date", "body"];

/// Union of metadata keys over the corpus, sorted.
pub fn corpus_metadata_fields(corpus: &[Document]) -> Vec<String> {
    let fields: BTreeSet<&String> = corpus.iter().flat_map(|d| d.metadata.keys()).collect();
    fields.into_iter().cloned().collect()
}

/// `id,title,date,body,<metadata fields sorted>`; missing values are empty.
pub fn write_corpus_csv<W: Write>(corpus: &[Document], w: W) -> Result<()> {
    let fields = corpus_metadata_fields(corpus);
    if let Some(clash) = fields.iter().find(|f| FIXED_COLUMNS.contains(&f.as_str())) {
        return Err(InterchangeError::ColumnClash(clash.clone()));
    }
    let mut out = csv_writer(w);
    let header: Vec<&str> = FIXED_COLUMNS.iter().copied().chain(fields.iter().map(String::as_str)).collect();
    out.write_record(&header)?;
    for doc in corpus {
        let date = doc.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
        let mut rec = vec![doc.id.as_str(), doc.title.as_str(), date.as_str(), doc.body.as_str()];
        rec.extend(fields.iter().map(|f| doc.metadata.get(f).map(String::as_str).unwrap_or("")));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_corpus_csv(corpus: &[Document], path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &render(|b| write_corpus_csv(corpus, b))?)?;
    Ok(())
}

/// `term_a,term_b,n_a,n_b,n_ab,N,measure,score`, score to 6 decimals, in
/// result order.
pub fn write_cooc_csv<W: Write>(result: &CooccurrenceResult, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["term_a", "term_b", "n_a", "n_b", "n_ab", "N", "measure", "score"])?;
    for p in &result.pairs {
        let c = &p.counts;
        out.write_record([
            p.term_a.as_str(),
            p.term_b.as_str(),
            &c.n_a.to_string(),
            &c.n_b.to_string(),
            &c.n_ab.to_string(),
            &c.n.to_string(),
            result.measure.as_str(),
            &format!("{:.6}", p.score),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_cooc_csv(result: &CooccurrenceResult, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &render(|b| write_cooc_csv(result, b))?)?;
    Ok(())
}

/// `doc_id,code_id,author,timestamp`, one row per labeled document in id
/// order; timestamps are RFC 3339 UTC.
pub fn write_labels_csv<W: Write>(session: &CodingSession, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["doc_id", "code_id", "author", "timestamp"])?;
    for (doc, rec) in &session.labeled {
        let ts = rec.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true);
        out.write_record([doc.as_str(), rec.code.as_str(), rec.author.as_str(), ts.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_labels_csv(session: &CodingSession, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &render(|b| write_labels_csv(session, b))?)?;
    Ok(())
}

/// Writes `theta.csv` and `phi.csv` into `dir`.
pub fn export_topics_csv(model: &TopicModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    atomic_write(dir.join("theta.csv"), &render(|b| Ok(write_theta_csv(model, b)?))?)?;
    atomic_write(dir.join("phi.csv"), &render(|b| Ok(write_phi_csv(model, b)?))?)?;
    Ok(())
}

/// `code,precision,recall,f1,support`, one row per code followed by `macro`
/// and `micro` rows (support is the total there).
pub fn write_eval_csv<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["code", "precision", "recall", "f1", "support"])?;
    for m in &report.per_class {
        out.write_record([m.code.clone(), sig9(m.precision), sig9(m.recall), sig9(m.f1), m.support.to_string()])?;
    }
    let total: u64 = report.per_class.iter().map(|m| m.support).sum();
    for (name, p, r, f) in [
        ("macro", report.macro_precision, report.macro_recall, report.macro_f1),
        ("micro", report.micro_precision, report.micro_recall, report.micro_f1),
    ] {
        out.write_record([name.to_string(), sig9(p), sig9(r), sig9(f), total.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_eval_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &render(|b| write_eval_csv(report, b))?)?;
    Ok(())
}

pub fn export_eval_json(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| InterchangeError::Csv(e.to_string()))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)?;
    Ok(())
}
