//! Parameterised preprocessing: tokenization, vocabulary construction and the
//! document-term matrix.
//!
//! Vocabulary filters run in a fixed order: length bounds, number removal,
//! stopwords, blacklist, whitelist, then document-frequency pruning.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, EntityKind, EntitySpan};
use crate::text::is_word_char;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViolation {
    pub fields: Vec<String>,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid analysis parameters: {}", .0.iter().map(|v| format!("{} ({})", v.message, v.fields.join(", "))).collect::<Vec<_>>().join("; "))]
    InvalidParams(Vec<FieldViolation>),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("vocabulary is empty after filtering; parameters are too aggressive")]
    EmptyVocabulary,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// The full preprocessing parameterisation of an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    /// 1 for unigrams, 2 to add adjacent-pair tokens `a_b`.
    pub ngram: u8,
    pub min_char: usize,
    pub max_char: usize,
    pub lowercase: bool,
    pub remove_stopwords: bool,
    /// Stopword list key: `en` or `de`.
    pub stopword_language: String,
    pub remove_numbers: bool,
    pub blacklist: BTreeSet<String>,
    /// When present, only these terms survive.
    pub whitelist: Option<BTreeSet<String>>,
    pub prune_min_df: f64,
    pub prune_max_df: f64,
    /// Join multi-word entity surfaces with `_` into a single token.
    pub consolidate_entities: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            ngram: 1,
            min_char: 2,
            max_char: 50,
            lowercase: true,
            remove_stopwords: false,
            stopword_language: "en".to_string(),
            remove_numbers: false,
            blacklist: BTreeSet::new(),
            whitelist: None,
            prune_min_df: 0.0,
            prune_max_df: 1.0,
            consolidate_entities: false,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut bad = |fields: &[&str], message: &str| {
            v.push(FieldViolation {
                fields: fields.iter().map(|f| f.to_string()).collect(),
                message: message.to_string(),
            })
        };
        if !matches!(self.ngram, 1 | 2) {
            bad(&["ngram"], "ngram must be 1 or 2");
        }
        if self.min_char < 1 {
            bad(&["min_char"], "min_char must be at least 1");
        }
        if self.min_char > self.max_char {
            bad(&["min_char", "max_char"], "min_char must not exceed max_char");
        }
        if !(0.0..1.0).contains(&self.prune_min_df) {
            bad(&["prune_min_df"], "prune_min_df must lie in [0, 1)");
        }
        if !(self.prune_max_df > 0.0 && self.prune_max_df <= 1.0) {
            bad(&["prune_max_df"], "prune_max_df must lie in (0, 1]");
        }
        if self.prune_min_df >= self.prune_max_df {
            bad(&["prune_min_df", "prune_max_df"], "prune_min_df must be below prune_max_df");
        }
        if self.remove_stopwords && stopwords(&self.stopword_language).is_none() {
            bad(&["stopword_language"], "unknown stopword language");
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::InvalidParams(v))
        }
    }

    /// Applies the term-level filters (everything except df pruning).
    pub fn keeps_term(&self, term: &str) -> bool {
        let len = term.chars().count();
        if len < self.min_char || len > self.max_char {
            return false;
        }
        if self.remove_numbers && is_number(term) {
            return false;
        }
        let lower = term.to_lowercase();
        if self.remove_stopwords {
            if let Some(stop) = stopwords(&self.stopword_language) {
                if stop.contains(lower.as_str()) {
                    return false;
                }
            }
        }
        if self.blacklist.iter().any(|b| b.to_lowercase() == lower) {
            return false;
        }
        if let Some(white) = &self.whitelist {
            if !white.iter().any(|w| w.to_lowercase() == lower) {
                return false;
            }
        }
        true
    }
}

/// A term is a number when every character is a digit, `.` or `,`.
pub fn is_number(term: &str) -> bool {
    !term.is_empty() && term.chars().all(|c| c.is_numeric() || c == '.' || c == ',')
}

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");
const STOPWORDS_DE: &str = include_str!("../data/stopwords_de.txt");

/// Bundled stopword list for a language key (`en`, `de`).
pub fn stopwords(language: &str) -> Option<&'static HashSet<&'static str>> {
    static EN: OnceLock<HashSet<&'static str>> = OnceLock::new();
    static DE: OnceLock<HashSet<&'static str>> = OnceLock::new();
    let parse = |s: &'static str| s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    match language {
        "en" | "english" => Some(EN.get_or_init(|| parse(STOPWORDS_EN))),
        "de" | "german" => Some(DE.get_or_init(|| parse(STOPWORDS_DE))),
        _ => None,
    }
}

/// Reads a newline-delimited UTF-8 term list; blank lines are skipped.
pub fn load_term_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Scalar-value span in the source text.
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub ngram: u8,
}

/// Whitespace-separated words with non-alphanumeric edges trimmed, as
/// scalar-value spans.
fn word_spans(chars: &[char]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let (mut s, mut e) = (start, i);
        while s < e && !is_word_char(chars[s]) {
            s += 1;
        }
        while e > s && !is_word_char(chars[e - 1]) {
            e -= 1;
        }
        if s < e {
            spans.push((s, e));
        }
    }
    spans
}

/// Splits `text` into tokens: Unicode whitespace separates words, punctuation
/// is stripped from both ends, spans point at the kept characters. With
/// `ngram == 2` every adjacent pair also yields an `a_b` token over the union
/// span. Output is ordered by `(start, end)`.
pub fn tokenize(text: &str, params: &AnalysisParams) -> Vec<Token> {
    tokenize_with_entities(text, &[], params)
}

/// Tokenizes a document body, consolidating multi-word entity mentions when
/// `params.consolidate_entities` is set.
pub fn tokenize_document(doc: &Document, params: &AnalysisParams) -> Vec<Token> {
    if params.consolidate_entities {
        tokenize_with_entities(&doc.body, &doc.entity_tags, params)
    } else {
        tokenize_with_entities(&doc.body, &[], params)
    }
}

fn tokenize_with_entities(text: &str, entities: &[EntitySpan], params: &AnalysisParams) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let surface = |s: usize, e: usize| -> String {
        let raw: String = chars[s..e].iter().collect();
        if params.lowercase {
            raw.to_lowercase()
        } else {
            raw
        }
    };
    let spans = word_spans(&chars);
    let mut unigrams: Vec<Token> = Vec::with_capacity(spans.len());
    let mut i = 0;
    while i < spans.len() {
        let (s, e) = spans[i];
        let entity = entities
            .iter()
            .find(|ent| ent.start <= s && e <= ent.end)
            .filter(|ent| spans.get(i + 1).is_some_and(|&(_, e2)| e2 <= ent.end));
        if let Some(ent) = entity {
            let mut j = i;
            let mut parts = Vec::new();
            while j < spans.len() && spans[j].0 >= ent.start && spans[j].1 <= ent.end {
                parts.push(surface(spans[j].0, spans[j].1));
                j += 1;
            }
            unigrams.push(Token { start: s, end: spans[j - 1].1, surface: parts.join("_"), ngram: 1 });
            i = j;
        } else {
            unigrams.push(Token { start: s, end: e, surface: surface(s, e), ngram: 1 });
            i += 1;
        }
    }
    if params.ngram < 2 {
        return unigrams;
    }
    let mut out = Vec::with_capacity(unigrams.len() * 2);
    for (k, tok) in unigrams.iter().enumerate() {
        out.push(tok.clone());
        if let Some(next) = unigrams.get(k + 1) {
            out.push(Token {
                start: tok.start,
                end: next.end,
                surface: format!("{}_{}", tok.surface, next.surface),
                ngram: 2,
            });
        }
    }
    out
}

/// Term → contiguous index, with document frequencies and the parameters the
/// vocabulary was built under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    params: AnalysisParams,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    params: AnalysisParams,
    n_docs: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.params, r.terms, r.doc_freq, r.n_docs)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr { params: v.params, n_docs: v.n_docs, terms: v.terms, doc_freq: v.doc_freq }
    }
}

impl Vocabulary {
    /// Builds a vocabulary from already-sorted parts.
    pub fn from_parts(params: AnalysisParams, terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { params, terms, doc_freq, n_docs, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn params(&self) -> &AnalysisParams {
        &self.params
    }
}

/// Builds the vocabulary of `corpus` under `params`.
pub fn build_vocabulary(corpus: &[Document], params: &AnalysisParams) -> Result<Vocabulary> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: BTreeSet<String> = tokenize_document(doc, params).into_iter().map(|t| t.surface).collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let n = corpus.len() as f64;
    let (terms, doc_freq): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|(term, _)| params.keeps_term(term))
        .filter(|&(_, f)| {
            let share = f as f64 / n;
            share >= params.prune_min_df && share <= params.prune_max_df
        })
        .unzip();
    if terms.is_empty() {
        return Err(PipelineError::EmptyVocabulary);
    }
    Ok(Vocabulary::from_parts(params.clone(), terms, doc_freq, corpus.len()))
}

/// One token in a document's stream. `term` is `None` for tokens removed by
/// the vocabulary filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub start: usize,
    pub end: usize,
    pub term: Option<usize>,
    pub ngram: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtmRow {
    pub id: String,
    /// Sparse `(term index, count)` pairs sorted by term index.
    pub counts: Vec<(usize, u32)>,
    pub stream: Vec<StreamEntry>,
}

impl DtmRow {
    /// Number of in-vocabulary tokens.
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// In-vocabulary terms in stream order, with their stream positions.
    pub fn term_positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.stream
            .iter()
            .enumerate()
            .filter_map(|(pos, e)| e.term.map(|t| (pos, t)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    vocab: Vocabulary,
    rows: Vec<DtmRow>,
    index: HashMap<String, usize>,
}

impl DocTermMatrix {
    pub fn from_rows(vocab: Vocabulary, rows: Vec<DtmRow>) -> Self {
        let index = rows.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        DocTermMatrix { vocab, rows, index }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn rows(&self) -> &[DtmRow] {
        &self.rows
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row(&self, id: &str) -> Option<&DtmRow> {
        self.position(id).map(|i| &self.rows[i])
    }

    /// Total in-vocabulary tokens in the matrix.
    pub fn n_tokens(&self) -> usize {
        self.rows.iter().map(DtmRow::len).sum()
    }

    /// Corpus-wide count of every term.
    pub fn term_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_terms()];
        for row in &self.rows {
            for &(t, c) in &row.counts {
                totals[t] += c as u64;
            }
        }
        totals
    }
}

/// Maps a token list onto the vocabulary.
pub fn stream_for(tokens: &[Token], vocab: &Vocabulary) -> Vec<StreamEntry> {
    tokens
        .iter()
        .map(|t| StreamEntry { start: t.start, end: t.end, term: vocab.index_of(&t.surface), ngram: t.ngram })
        .collect()
}

/// Counts every document of `corpus` over `vocab`, tokenizing with the
/// parameters the vocabulary was built under.
pub fn build_dtm(corpus: &[Document], vocab: &Vocabulary) -> DocTermMatrix {
    let rows = corpus
        .iter()
        .map(|doc| {
            let stream = stream_for(&tokenize_document(doc, vocab.params()), vocab);
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            for t in stream.iter().filter_map(|e| e.term) {
                *counts.entry(t).or_insert(0) += 1;
            }
            DtmRow { id: doc.id.clone(), counts: counts.into_iter().collect(), stream }
        })
        .collect();
    DocTermMatrix::from_rows(vocab.clone(), rows)
}

/// Candidate blacklist from tagged entities: lowercased words of every span
/// whose kind is in `kinds`, plus the `_`-joined form of multi-word surfaces.
pub fn blacklist_from_entities(corpus: &[Document], kinds: &BTreeSet<EntityKind>) -> BTreeSet<String> {
    let params = AnalysisParams { min_char: 1, ..AnalysisParams::default() };
    let mut out = BTreeSet::new();
    for span in corpus.iter().flat_map(|d| &d.entity_tags).filter(|s| kinds.contains(&s.kind)) {
        let words: Vec<String> = tokenize(&span.surface, &params).into_iter().map(|t| t.surface).collect();
        if words.len() > 1 {
            out.insert(words.join("_"));
        }
        out.extend(words);
    }
    out
}
