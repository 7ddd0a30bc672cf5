//! Word frequencies, time series and significance-scored co-occurrence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::pipeline::{stream_for, tokenize_document, DocTermMatrix, Vocabulary};

#[derive(Debug, Error)]
pub enum CoocError {
    #[error("term {0:?} is not in the vocabulary")]
    UnknownTerm(String),
    #[error("co-occurrence needs at least two vocabulary terms, got {0}")]
    TooFewTerms(usize),
    #[error("min_pair_count must be at least 1")]
    BadMinCount,
    #[error("unknown {kind} {value:?}")]
    Parse { kind: &'static str, value: String },
}

pub type Result<T> = std::result::Result<T, CoocError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermFrequency {
    pub term: String,
    pub count: u64,
    pub doc_freq: usize,
}

/// The `top_n` most frequent terms by total count (ties lexicographic).
pub fn term_frequencies(dtm: &DocTermMatrix, top_n: usize) -> Vec<TermFrequency> {
    let totals = dtm.term_totals();
    let mut df = vec![0usize; dtm.n_terms()];
    for row in dtm.rows() {
        for &(t, _) in &row.counts {
            df[t] += 1;
        }
    }
    let vocab = dtm.vocab();
    let mut out: Vec<TermFrequency> = (0..dtm.n_terms())
        .map(|t| TermFrequency { term: vocab.term(t).to_string(), count: totals[t], doc_freq: df[t] })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    out.truncate(top_n.max(1));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
}

impl FromStr for Granularity {
    type Err = CoocError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "year" => Ok(Granularity::Year),
            "month" => Ok(Granularity::Month),
            _ => Err(CoocError::Parse { kind: "granularity", value: s.into() }),
        }
    }
}

/// A calendar year, or a month within a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Period {
    pub year: i32,
    pub month: Option<u32>,
}

impl Period {
    fn next(self) -> Period {
        match self.month {
            None => Period { year: self.year + 1, month: None },
            Some(12) => Period { year: self.year + 1, month: Some(1) },
            Some(m) => Period { year: self.year, month: Some(m + 1) },
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.month {
            None => write!(f, "{}", self.year),
            Some(m) => write!(f, "{}-{:02}", self.year, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub period: Period,
    pub count: u64,
    pub doc_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub term: String,
    pub points: Vec<SeriesPoint>,
    /// Documents skipped because they carry no date.
    pub excluded: usize,
}

/// Occurrences of `term` per period. Periods between the first and last
/// observed date are all emitted, zero-filled.
pub fn time_series(corpus: &[Document], vocab: &Vocabulary, term: &str, granularity: Granularity) -> Result<TimeSeries> {
    let target = vocab.index_of(term).ok_or_else(|| CoocError::UnknownTerm(term.to_string()))?;
    let mut by_period: BTreeMap<Period, (u64, usize)> = BTreeMap::new();
    let mut excluded = 0;
    for doc in corpus {
        let Some(date) = doc.date else {
            excluded += 1;
            continue;
        };
        let period = match granularity {
            Granularity::Year => Period { year: date.year(), month: None },
            Granularity::Month => Period { year: date.year(), month: Some(date.month()) },
        };
        let hits = stream_for(&tokenize_document(doc, vocab.params()), vocab)
            .iter()
            .filter(|e| e.term == Some(target))
            .count() as u64;
        let slot = by_period.entry(period).or_insert((0, 0));
        slot.0 += hits;
        if hits > 0 {
            slot.1 += 1;
        }
    }
    let mut points = Vec::new();
    if let (Some(&first), Some(&last)) = (by_period.keys().next(), by_period.keys().next_back()) {
        let mut p = first;
        while p <= last {
            let (count, doc_count) = by_period.get(&p).copied().unwrap_or((0, 0));
            points.push(SeriesPoint { period: p, count, doc_count });
            p = p.next();
        }
    }
    Ok(TimeSeries { term: term.to_string(), points, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextUnit {
    Sentence,
    Document,
}

impl FromStr for ContextUnit {
    type Err = CoocError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sentence" => Ok(ContextUnit::Sentence),
            "document" => Ok(ContextUnit::Document),
            _ => Err(CoocError::Parse { kind: "context unit", value: s.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Dice,
    Pmi,
    Loglik,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Dice => "dice",
            Measure::Pmi => "pmi",
            Measure::Loglik => "loglik",
        }
    }

    pub fn score(self, c: &ContingencyCounts) -> f64 {
        match self {
            Measure::Dice => dice(c),
            Measure::Pmi => pmi(c),
            Measure::Loglik => log_likelihood(c),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = CoocError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dice" => Ok(Measure::Dice),
            "pmi" => Ok(Measure::Pmi),
            "loglik" | "ll" | "log-likelihood" | "g2" => Ok(Measure::Loglik),
            _ => Err(CoocError::Parse { kind: "measure", value: s.into() }),
        }
    }
}

/// Binary context counts for a term pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyCounts {
    pub n_ab: u64,
    pub n_a: u64,
    pub n_b: u64,
    pub n: u64,
}

/// `2·n_ab / (n_a + n_b)`.
pub fn dice(c: &ContingencyCounts) -> f64 {
    2.0 * c.n_ab as f64 / (c.n_a + c.n_b) as f64
}

/// Natural-log pointwise mutual information `ln(n_ab·N / (n_a·n_b))`.
pub fn pmi(c: &ContingencyCounts) -> f64 {
    ((c.n_ab as f64 * c.n as f64) / (c.n_a as f64 * c.n_b as f64)).ln()
}

/// Dunning's G² over the 2×2 table, with `0·ln 0 = 0`.
pub fn log_likelihood(c: &ContingencyCounts) -> f64 {
    let (a, b, ab, n) = (c.n_a as f64, c.n_b as f64, c.n_ab as f64, c.n as f64);
    let observed = [ab, a - ab, b - ab, n - a - b + ab];
    let rows = [a, a, n - a, n - a];
    let cols = [b, n - b, b, n - b];
    let g2: f64 = (0..4)
        .map(|i| {
            let o = observed[i];
            if o == 0.0 {
                0.0
            } else {
                o * (o / (rows[i] * cols[i] / n)).ln()
            }
        })
        .sum();
    (2.0 * g2).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrencePair {
    pub term_a: String,
    pub term_b: String,
    pub counts: ContingencyCounts,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceResult {
    pub measure: Measure,
    pub unit: ContextUnit,
    /// Sorted by score descending, then `(term_a, term_b)`; `term_a < term_b`.
    pub pairs: Vec<CooccurrencePair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoocOptions {
    pub unit: ContextUnit,
    pub measure: Measure,
    pub min_pair_count: u64,
    /// Keep only the best `top_n` pairs; `None` keeps all.
    pub top_n: Option<usize>,
}

impl Default for CoocOptions {
    fn default() -> Self {
        CoocOptions { unit: ContextUnit::Sentence, measure: Measure::Dice, min_pair_count: 1, top_n: None }
    }
}

/// Sentence segments as scalar-value ranges: maximal runs between `.`, `!`, `?`.
pub fn sentence_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            out.push((start, i));
            start = i + 1;
        }
        n = i + 1;
    }
    out.push((start, n));
    out
}

/// Sets of vocabulary terms present in each context. Sentences without any
/// token are not contexts; every document is one.
pub fn contexts(corpus: &[Document], vocab: &Vocabulary, unit: ContextUnit) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::new();
    for doc in corpus {
        let tokens = tokenize_document(doc, vocab.params());
        let stream = stream_for(&tokens, vocab);
        match unit {
            ContextUnit::Document => out.push(stream.iter().filter_map(|e| e.term).collect()),
            ContextUnit::Sentence => {
                let ranges = sentence_ranges(&doc.body);
                let mut per: Vec<Option<BTreeSet<usize>>> = vec![None; ranges.len()];
                let mut r = 0;
                for e in &stream {
                    while r + 1 < ranges.len() && e.start >= ranges[r].1 {
                        r += 1;
                    }
                    let set = per[r].get_or_insert_with(BTreeSet::new);
                    if let Some(t) = e.term {
                        set.insert(t);
                    }
                }
                out.extend(per.into_iter().flatten());
            }
        }
    }
    out
}

/// Scores every co-occurring term pair over binary context presence.
pub fn cooccurrences(corpus: &[Document], vocab: &Vocabulary, options: &CoocOptions) -> Result<CooccurrenceResult> {
    if options.min_pair_count < 1 {
        return Err(CoocError::BadMinCount);
    }
    if vocab.len() < 2 {
        return Err(CoocError::TooFewTerms(vocab.len()));
    }
    let ctx = contexts(corpus, vocab, options.unit);
    let n = ctx.len() as u64;
    let mut single = vec![0u64; vocab.len()];
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    for set in &ctx {
        let terms: Vec<usize> = set.iter().copied().collect();
        for (i, &a) in terms.iter().enumerate() {
            single[a] += 1;
            for &b in &terms[i + 1..] {
                *joint.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let mut pairs: Vec<CooccurrencePair> = joint
        .into_iter()
        .filter(|&(_, n_ab)| n_ab >= options.min_pair_count)
        .map(|((a, b), n_ab)| {
            // indices follow lexicographic term order, so a < b as strings too
            let counts = ContingencyCounts { n_ab, n_a: single[a], n_b: single[b], n };
            CooccurrencePair {
                term_a: vocab.term(a).to_string(),
                term_b: vocab.term(b).to_string(),
                counts,
                score: options.measure.score(&counts),
            }
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.term_a.cmp(&y.term_a))
            .then_with(|| x.term_b.cmp(&y.term_b))
    });
    if let Some(top) = options.top_n {
        pairs.truncate(top);
    }
    Ok(CooccurrenceResult { measure: options.measure, unit: options.unit, pairs })
}
