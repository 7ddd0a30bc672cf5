//! Analysis steps shared by the command line and the service. Both front
//! ends call these functions, so equal inputs give byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cm_core::classify::{Codebook, LearningCurve};
use cm_core::cooccurrence::{cooccurrences, CoocOptions, CooccurrenceResult, TermFrequency};
use cm_core::corpus::{import_csv_reader, Document, EntityKind, ImportMapping};
use cm_core::interchange::write_cooc_csv;
use cm_core::numfmt::sig9;
use cm_core::pipeline::{blacklist_from_entities, build_dtm, build_vocabulary, AnalysisParams, DocTermMatrix, Vocabulary};
use cm_core::topics::{fit_lda_observed, write_phi_csv, write_theta_csv, LdaConfig, SweepProgress, TopicModel};

use crate::error::{Error, Result};

/// Preprocessing parameters with entity kinds whose surfaces are added to the
/// blacklist, as in "blacklist every location".
pub fn effective_params(
    corpus: &[Document],
    params: &AnalysisParams,
    blacklist_entities: &BTreeSet<EntityKind>,
) -> AnalysisParams {
    let mut params = params.clone();
    if !blacklist_entities.is_empty() {
        params.blacklist.extend(blacklist_from_entities(corpus, blacklist_entities));
    }
    params
}

/// Vocabulary and document-term matrix of a corpus under fixed parameters.
pub struct Prepared {
    pub params: AnalysisParams,
    pub vocab: Vocabulary,
    pub dtm: DocTermMatrix,
}

pub fn prepare(corpus: &[Document], params: &AnalysisParams) -> Result<Prepared> {
    let vocab = build_vocabulary(corpus, params)?;
    let dtm = build_dtm(corpus, &vocab);
    Ok(Prepared { params: params.clone(), vocab, dtm })
}

/// Content address of a parameter set: the first 16 hex digits of the
/// SHA-256 of its JSON form.
pub fn preset_id(params: &AnalysisParams) -> String {
    let json = serde_json::to_vec(params).expect("params serialize");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn cooc(corpus: &[Document], prepared: &Prepared, options: &CoocOptions) -> Result<CooccurrenceResult> {
    Ok(cooccurrences(corpus, &prepared.vocab, options)?)
}

pub fn cooc_csv(result: &CooccurrenceResult) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_cooc_csv(result, &mut buf)?;
    Ok(buf)
}

/// `term,count,doc_freq`.
pub fn frequencies_csv(freqs: &[TermFrequency]) -> Vec<u8> {
    let mut out = String::from("term,count,doc_freq\n");
    for f in freqs {
        out.push_str(&format!("{},{},{}\n", csv_field(&f.term), f.count, f.doc_freq));
    }
    out.into_bytes()
}

/// `labels,accuracy`.
pub fn curve_csv(curve: &LearningCurve) -> Vec<u8> {
    let mut out = String::from("labels,accuracy\n");
    for p in &curve.points {
        out.push_str(&format!("{},{}\n", p.labels, sig9(p.accuracy)));
    }
    out.into_bytes()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// LDA settings with optional overrides of the conventional defaults. An
/// omitted burn-in is half the sweeps, capped at 500.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaSettings {
    pub k: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

pub fn default_seed() -> u64 {
    42
}

impl LdaSettings {
    pub fn config(&self) -> Result<LdaConfig> {
        let mut cfg = LdaConfig::new(self.k);
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        cfg.burn_in = self.burn_in.unwrap_or((cfg.iterations / 2).min(500));
        cfg.seed = self.seed;
        cfg.validate().map_err(|e| Error::field("options", e.to_string()))?;
        Ok(cfg)
    }
}

pub fn fit(
    prepared: &Prepared,
    config: &LdaConfig,
    observer: impl FnMut(&SweepProgress) -> ControlFlow<()>,
) -> Result<TopicModel> {
    Ok(fit_lda_observed(&prepared.dtm, config, observer)?)
}

pub fn theta_csv(model: &TopicModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_theta_csv(model, &mut buf)?;
    Ok(buf)
}

pub fn phi_csv(model: &TopicModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_phi_csv(model, &mut buf)?;
    Ok(buf)
}

/// Gold codes taken from a metadata field; documents without it are left out.
pub fn gold_from_field(corpus: &[Document], field: &str) -> Result<BTreeMap<String, String>> {
    let gold: BTreeMap<String, String> = corpus
        .iter()
        .filter_map(|d| d.metadata.get(field).map(|v| (d.id.clone(), v.clone())))
        .collect();
    if gold.is_empty() {
        return Err(Error::Unprocessable(format!("metadata field {field:?} is present on no document")));
    }
    Ok(gold)
}

/// The given codes in order, or else the distinct label values sorted.
pub fn codebook_for(codes: Option<&[String]>, labels: &BTreeMap<String, String>) -> Result<Codebook> {
    let ids: Vec<String> = match codes {
        Some(c) if !c.is_empty() => c.to_vec(),
        _ => labels.values().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
    };
    Ok(Codebook::from_ids(ids.iter().map(String::as_str))?)
}

/// Reads `doc_id,code_id[,author,timestamp]` rows.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::BadRequest(format!("labels: {e}")))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::BadRequest(format!("labels: no {name} column")))
    };
    let (doc, code) = (col("doc_id")?, col("code_id")?);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::BadRequest(format!("labels: {e}")))?;
        out.insert(rec.get(doc).unwrap_or("").to_string(), rec.get(code).unwrap_or("").to_string());
    }
    Ok(out)
}

/// Reads a corpus CSV written by the corpus export; every column after the
/// fixed four is a metadata field.
pub fn read_corpus_csv(bytes: &[u8]) -> Result<Vec<Document>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers().map_err(|e| Error::BadRequest(format!("corpus csv: {e}")))?.clone();
    let fields: Vec<&str> = header.iter().filter(|h| !["id", "title", "date", "body"].contains(h)).collect();
    let (docs, _) = import_csv_reader(bytes, &ImportMapping::for_corpus_export(fields))?;
    Ok(docs)
}

/// A corpus file: a JSON array of documents (entity tags included) or a
/// corpus CSV.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let bytes = std::fs::read(path).map_err(|e| Error::BadRequest(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_corpus_csv(&bytes)
    } else {
        serde_json::from_slice(&bytes).map_err(|e| Error::BadRequest(format!("{}: {e}", path.display())))
    }
}

pub fn corpus_json(corpus: &[Document]) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(corpus)?;
    bytes.push(b'\n');
    Ok(bytes)
}
