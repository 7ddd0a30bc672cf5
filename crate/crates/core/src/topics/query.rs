use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Result, TopicError, TopicModel};
use crate::corpus::Document;
use crate::pipeline::DocTermMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRelevance {
    pub term: String,
    pub relevance: f64,
}

/// Indices of the `n` largest weights, ties broken by lower index (which is
/// lexicographic term order).
pub fn top_terms_by_weight(weights: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// The `n` most relevant terms of `topic`:
/// `relevance(w) = λ·ln φ_kw + (1−λ)·ln(φ_kw / p(w))` with `p(w)` the corpus
/// term probability. `λ = 1` ranks by φ alone. Terms never seen in the
/// corpus are skipped when `λ < 1`.
pub fn top_words(model: &TopicModel, topic: usize, n: usize, lambda: f64) -> Result<Vec<TermRelevance>> {
    model.check_topic(topic)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(TopicError::InvalidConfig(format!("lambda {lambda} outside [0, 1]")));
    }
    let phi = model.phi_row(topic);
    let p = model.term_probabilities();
    let scores: Vec<f64> = phi
        .iter()
        .zip(&p)
        .map(|(&f, &pw)| {
            if lambda == 1.0 {
                f.ln()
            } else if pw == 0.0 {
                f64::NEG_INFINITY
            } else {
                lambda * f.ln() + (1.0 - lambda) * (f / pw).ln()
            }
        })
        .collect();
    Ok(top_terms_by_weight(&scores, n)
        .into_iter()
        .filter(|&w| scores[w].is_finite())
        .map(|w| TermRelevance { term: model.vocab().term(w).to_string(), relevance: scores[w] })
        .collect())
}

/// A term pair left out of a coherence sum because the conditioning word
/// occurs in no document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub topic: usize,
    pub term: String,
    pub given: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub scores: Vec<f64>,
    pub skipped: Vec<SkippedPair>,
}

impl Coherence {
    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len().max(1) as f64
    }
}

/// UMass coherence of ranked term lists over the documents of `dtm`:
/// `C = Σ_{i≥2} Σ_{j<i} ln((D(w_i, w_j) + 1) / D(w_j))`.
pub fn umass_coherence(top_terms: &[Vec<usize>], dtm: &DocTermMatrix) -> Coherence {
    let wanted: BTreeSet<usize> = top_terms.iter().flatten().copied().collect();
    let mut docs_with: HashMap<usize, BTreeSet<usize>> = wanted.iter().map(|&w| (w, BTreeSet::new())).collect();
    for (d, row) in dtm.rows().iter().enumerate() {
        for &(t, _) in &row.counts {
            if let Some(set) = docs_with.get_mut(&t) {
                set.insert(d);
            }
        }
    }
    let vocab = dtm.vocab();
    let mut skipped = Vec::new();
    let scores = top_terms
        .iter()
        .enumerate()
        .map(|(topic, terms)| {
            let mut score = 0.0;
            for i in 1..terms.len() {
                for j in 0..i {
                    let dj = docs_with[&terms[j]].len();
                    if dj == 0 {
                        skipped.push(SkippedPair {
                            topic,
                            term: vocab.term(terms[i]).to_string(),
                            given: vocab.term(terms[j]).to_string(),
                        });
                        continue;
                    }
                    let dij = docs_with[&terms[i]].intersection(&docs_with[&terms[j]]).count();
                    score += ((dij as f64 + 1.0) / dj as f64).ln();
                }
            }
            score
        })
        .collect();
    Coherence { scores, skipped }
}

/// UMass coherence of every topic's top-`m` words (φ order).
pub fn coherence_umass(model: &TopicModel, dtm: &DocTermMatrix, m: usize) -> Result<Coherence> {
    if m > model.n_terms() {
        return Err(TopicError::TooManyWords { requested: m, vocabulary: model.n_terms() });
    }
    if dtm.vocab().terms() != model.vocab().terms() {
        return Err(TopicError::Mismatch("vocabularies differ".into()));
    }
    let top: Vec<Vec<usize>> = (0..model.n_topics())
        .map(|t| top_terms_by_weight(model.phi_row(t), m))
        .collect();
    Ok(umass_coherence(&top, dtm))
}

/// A highlighted token of a document for one topic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub start: usize,
    pub end: usize,
    pub topic: usize,
    /// `φ_kw / max_w' φ_kw'`, in (0, 1].
    pub weight: f64,
}

/// Tokens of `doc_id` assigned to `topic` whose normalised φ weight reaches
/// `min_weight`. Only unigram stream entries are highlighted, so spans never
/// overlap.
pub fn highlight(
    model: &TopicModel,
    dtm: &DocTermMatrix,
    doc_id: &str,
    topic: usize,
    min_weight: f64,
) -> Result<Vec<HighlightSpan>> {
    model.check_topic(topic)?;
    let d = model.doc_index(doc_id).ok_or_else(|| TopicError::UnknownDocument(doc_id.to_string()))?;
    let row = dtm.row(doc_id).ok_or_else(|| TopicError::UnknownDocument(doc_id.to_string()))?;
    let phi = model.phi_row(topic);
    let max = phi.iter().copied().fold(f64::MIN, f64::max);
    let mut spans = Vec::new();
    for a in model.assignments(d) {
        let entry = row
            .stream
            .get(a.position)
            .filter(|e| e.term == Some(a.term))
            .ok_or_else(|| TopicError::Mismatch(format!("stream position {} of {doc_id:?}", a.position)))?;
        if a.topic != topic || entry.ngram != 1 {
            continue;
        }
        let weight = phi[a.term] / max;
        if weight >= min_weight {
            spans.push(HighlightSpan { start: entry.start, end: entry.end, topic, weight });
        }
    }
    Ok(spans)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocShare {
    pub id: String,
    pub share: f64,
}

/// Documents whose share of `topic` is at least `min_share`, largest first
/// (ties by id).
pub fn filter_by_topic(model: &TopicModel, topic: usize, min_share: f64) -> Result<Vec<DocShare>> {
    model.check_topic(topic)?;
    let mut out: Vec<DocShare> = (0..model.n_docs())
        .map(|d| DocShare { id: model.doc_ids()[d].clone(), share: model.theta_row(d)[topic] })
        .filter(|s| s.share >= min_share)
        .collect();
    out.sort_by(|a, b| b.share.total_cmp(&a.share).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}

pub const MISSING_GROUP: &str = "(missing)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group: String,
    pub size: usize,
    pub mean_theta: Vec<f64>,
}

/// Mean θ per value of a metadata field. Model documents without the field
/// form the [`MISSING_GROUP`]; groups are sorted by name.
pub fn topic_by_metadata(model: &TopicModel, corpus: &[Document], field: &str) -> Result<Vec<GroupMean>> {
    let by_id: HashMap<&str, &Document> = corpus.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut groups: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    let mut present = false;
    for (d, id) in model.doc_ids().iter().enumerate() {
        let value = by_id.get(id.as_str()).and_then(|doc| doc.metadata.get(field));
        present |= value.is_some();
        let key = value.cloned().unwrap_or_else(|| MISSING_GROUP.to_string());
        let slot = groups.entry(key).or_insert_with(|| (0, vec![0.0; model.n_topics()]));
        slot.0 += 1;
        for (acc, &x) in slot.1.iter_mut().zip(model.theta_row(d)) {
            *acc += x;
        }
    }
    if !present {
        return Err(TopicError::MissingField(field.to_string()));
    }
    Ok(groups
        .into_iter()
        .map(|(group, (size, sums))| GroupMean {
            group,
            size,
            mean_theta: sums.into_iter().map(|s| s / size as f64).collect(),
        })
        .collect())
}
