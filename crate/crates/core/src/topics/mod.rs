//! LDA topic modeling by collapsed Gibbs sampling, plus the qualitative
//! validation tools built on a fitted model.
//!
//! The sampler draws each token's topic from
//!
//! ```text
//! p(z_i = k | z_-i, w) ∝ (n_dk + α) · (n_kw + β) / (n_k + Vβ)
//! ```
//!
//! with the token's own assignment removed from the counts, and reports the
//! single final state: `θ_dk = (n_dk + α) / (n_d + Kα)` and
//! `φ_kw = (n_kw + β) / (n_k + Vβ)`. Randomness comes from ChaCha8 seeded with
//! the configured 64-bit seed, so fits are reproducible across platforms.

mod labels;
mod query;
mod store;

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::pipeline::{DocTermMatrix, Vocabulary};

pub use labels::{TopicLabel, TopicLabels};
pub use query::{
    coherence_umass, filter_by_topic, highlight, top_terms_by_weight, top_words, topic_by_metadata, umass_coherence,
    Coherence, DocShare, GroupMean, HighlightSpan, SkippedPair, TermRelevance, MISSING_GROUP,
};
pub use store::{load_model, save_model, write_phi_csv, write_theta_csv};

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("invalid LDA configuration: {0}")]
    InvalidConfig(String),
    #[error("document-term matrix has no documents")]
    EmptyDtm,
    #[error("every token is filtered; nothing to model")]
    NoTokens,
    #[error("topic {topic} out of range (model has {topics} topics)")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("metadata field {0:?} is present on no document")]
    MissingField(String),
    #[error("requested {requested} top words but the vocabulary has {vocabulary}")]
    TooManyWords { requested: usize, vocabulary: usize },
    #[error("label must not be empty")]
    EmptyLabel,
    #[error("fit cancelled")]
    Cancelled,
    #[error("model does not match the document-term matrix: {0}")]
    Mismatch(String),
    #[error("inconsistent model counts: {0}")]
    InconsistentCounts(String),
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TopicError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    /// Number of topics.
    pub k: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    /// Gibbs sweeps.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// Conventional defaults: `α = 50/K`, `β = 0.01`, 1000 sweeps, 500 burn-in.
    pub fn new(k: usize) -> Self {
        LdaConfig {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TopicError::InvalidConfig(m.to_string()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if self.burn_in >= self.iterations {
            return bad("burn_in must be below iterations");
        }
        Ok(())
    }
}

/// One modeled token: its position in the document's stream, its term and
/// its topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAssignment {
    pub position: usize,
    pub term: usize,
    pub topic: usize,
}

/// Reported once per sweep during fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepProgress {
    pub sweep: usize,
    pub total: usize,
    pub log_likelihood: f64,
}

/// A fitted model: final assignments, their count tables and the estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    config: LdaConfig,
    vocab: Vocabulary,
    doc_ids: Vec<String>,
    assignments: Vec<Vec<TokenAssignment>>,
    n_dk: Vec<u32>,
    n_kw: Vec<u32>,
    n_k: Vec<u32>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    log_likelihood_trace: Vec<f64>,
    warnings: Vec<String>,
}

impl TopicModel {
    /// Rebuilds count tables and estimates from assignments.
    pub fn from_assignments(
        config: LdaConfig,
        vocab: Vocabulary,
        doc_ids: Vec<String>,
        assignments: Vec<Vec<TokenAssignment>>,
        log_likelihood_trace: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        if doc_ids.len() != assignments.len() {
            return Err(TopicError::Format("document count does not match assignments".into()));
        }
        let (k, v) = (config.k, vocab.len());
        for a in assignments.iter().flatten() {
            if a.topic >= k || a.term >= v {
                return Err(TopicError::Format(format!("assignment {a:?} out of range")));
            }
        }
        let (n_dk, n_kw, n_k) = count_tables(&assignments, k, v);
        let mut model = TopicModel {
            config,
            vocab,
            doc_ids,
            assignments,
            n_dk,
            n_kw,
            n_k,
            theta: Vec::new(),
            phi: Vec::new(),
            log_likelihood_trace,
            warnings: Vec::new(),
        };
        model.estimate();
        Ok(model)
    }

    fn estimate(&mut self) {
        let (k, v) = (self.config.k, self.vocab.len());
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        self.theta = Vec::with_capacity(self.doc_ids.len() * k);
        for (d, tokens) in self.assignments.iter().enumerate() {
            let denom = tokens.len() as f64 + k as f64 * alpha;
            self.theta
                .extend((0..k).map(|t| (self.n_dk[d * k + t] as f64 + alpha) / denom));
        }
        self.phi = Vec::with_capacity(k * v);
        for t in 0..k {
            let denom = self.n_k[t] as f64 + v as f64 * beta;
            self.phi.extend((0..v).map(|w| (self.n_kw[t * v + w] as f64 + beta) / denom));
        }
    }

    pub fn config(&self) -> &LdaConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_topics(&self) -> usize {
        self.config.k
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_index(&self, id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == id)
    }

    pub fn assignments(&self, doc: usize) -> &[TokenAssignment] {
        &self.assignments[doc]
    }

    pub fn all_assignments(&self) -> &[Vec<TokenAssignment>] {
        &self.assignments
    }

    pub fn theta_row(&self, doc: usize) -> &[f64] {
        let k = self.config.k;
        &self.theta[doc * k..(doc + 1) * k]
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.phi[topic * v..(topic + 1) * v]
    }

    pub fn doc_topic_count(&self, doc: usize, topic: usize) -> u32 {
        self.n_dk[doc * self.config.k + topic]
    }

    pub fn topic_term_count(&self, topic: usize, term: usize) -> u32 {
        self.n_kw[topic * self.vocab.len() + term]
    }

    pub fn topic_total(&self, topic: usize) -> u32 {
        self.n_k[topic]
    }

    /// Joint log-likelihood after initialisation (index 0) and after every sweep.
    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.log_likelihood_trace
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Corpus probability of every term, from the modeled tokens.
    pub fn term_probabilities(&self) -> Vec<f64> {
        let v = self.vocab.len();
        let mut totals = vec![0u64; v];
        for t in 0..self.config.k {
            for (w, total) in totals.iter_mut().enumerate() {
                *total += self.n_kw[t * v + w] as u64;
            }
        }
        let n: u64 = totals.iter().sum();
        totals.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
    }

    /// Recounts every table from the assignments and compares.
    pub fn check_counts(&self) -> Result<()> {
        let (n_dk, n_kw, n_k) = count_tables(&self.assignments, self.config.k, self.vocab.len());
        if n_dk != self.n_dk {
            return Err(TopicError::InconsistentCounts("document-topic".into()));
        }
        if n_kw != self.n_kw {
            return Err(TopicError::InconsistentCounts("topic-word".into()));
        }
        if n_k != self.n_k {
            return Err(TopicError::InconsistentCounts("topic totals".into()));
        }
        Ok(())
    }

    pub(crate) fn check_topic(&self, topic: usize) -> Result<()> {
        if topic >= self.config.k {
            return Err(TopicError::TopicOutOfRange { topic, topics: self.config.k });
        }
        Ok(())
    }
}

fn count_tables(assignments: &[Vec<TokenAssignment>], k: usize, v: usize) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let mut n_dk = vec![0u32; assignments.len() * k];
    let mut n_kw = vec![0u32; k * v];
    let mut n_k = vec![0u32; k];
    for (d, tokens) in assignments.iter().enumerate() {
        for a in tokens {
            n_dk[d * k + a.topic] += 1;
            n_kw[a.topic * v + a.term] += 1;
            n_k[a.topic] += 1;
        }
    }
    (n_dk, n_kw, n_k)
}

/// Fits LDA to `dtm`.
pub fn fit_lda(dtm: &DocTermMatrix, config: &LdaConfig) -> Result<TopicModel> {
    fit_lda_observed(dtm, config, |_| ControlFlow::Continue(()))
}

/// Fits LDA, calling `observer` after every sweep; returning
/// `ControlFlow::Break` cancels the fit.
pub fn fit_lda_observed<F>(dtm: &DocTermMatrix, config: &LdaConfig, mut observer: F) -> Result<TopicModel>
where
    F: FnMut(&SweepProgress) -> ControlFlow<()>,
{
    config.validate()?;
    if dtm.n_docs() == 0 {
        return Err(TopicError::EmptyDtm);
    }
    let (k, v) = (config.k, dtm.n_terms());
    let docs: Vec<Vec<(usize, usize)>> = dtm.rows().iter().map(|r| r.term_positions().collect()).collect();
    if docs.iter().all(Vec::is_empty) {
        return Err(TopicError::NoTokens);
    }
    let mut warnings = Vec::new();
    if v < k {
        warnings.push(format!("vocabulary size {v} is smaller than the topic count {k}"));
    }

    let (alpha, beta) = (config.alpha, config.beta);
    let v_beta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut z: Vec<Vec<usize>> = docs
        .iter()
        .map(|tokens| tokens.iter().map(|_| rng.random_range(0..k)).collect())
        .collect();

    // word-major topic-word table for the inner loop
    let mut n_dk = vec![0u32; docs.len() * k];
    let mut n_wk = vec![0u32; v * k];
    let mut n_k = vec![0u32; k];
    for (d, tokens) in docs.iter().enumerate() {
        for (i, &(_, w)) in tokens.iter().enumerate() {
            let t = z[d][i];
            n_dk[d * k + t] += 1;
            n_wk[w * k + t] += 1;
            n_k[t] += 1;
        }
    }

    let ll = |n_dk: &[u32], n_wk: &[u32], n_k: &[u32]| joint_log_likelihood(&docs, n_dk, n_wk, n_k, k, v, alpha, beta);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(ll(&n_dk, &n_wk, &n_k));

    let mut weights = vec![0.0f64; k];
    for sweep in 0..config.iterations {
        for (d, tokens) in docs.iter().enumerate() {
            let doc_counts = &mut n_dk[d * k..(d + 1) * k];
            for (i, &(_, w)) in tokens.iter().enumerate() {
                let old = z[d][i];
                let word_counts = &mut n_wk[w * k..(w + 1) * k];
                doc_counts[old] -= 1;
                word_counts[old] -= 1;
                n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (doc_counts[t] as f64 + alpha) * (word_counts[t] as f64 + beta) / (n_k[t] as f64 + v_beta);
                    weights[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                z[d][i] = new;
                doc_counts[new] += 1;
                word_counts[new] += 1;
                n_k[new] += 1;
            }
        }
        let value = ll(&n_dk, &n_wk, &n_k);
        trace.push(value);
        let progress = SweepProgress { sweep: sweep + 1, total: config.iterations, log_likelihood: value };
        if observer(&progress).is_break() {
            return Err(TopicError::Cancelled);
        }
    }

    let assignments = docs
        .iter()
        .zip(&z)
        .map(|(tokens, topics)| {
            tokens
                .iter()
                .zip(topics)
                .map(|(&(position, term), &topic)| TokenAssignment { position, term, topic })
                .collect()
        })
        .collect();
    let doc_ids = dtm.rows().iter().map(|r| r.id.clone()).collect();
    let mut model = TopicModel::from_assignments(config.clone(), dtm.vocab().clone(), doc_ids, assignments, trace)?;
    model.warnings = warnings;
    Ok(model)
}

/// `log p(w | z) + log p(z)` with θ and φ integrated out.
#[allow(clippy::too_many_arguments)]
fn joint_log_likelihood(
    docs: &[Vec<(usize, usize)>],
    n_dk: &[u32],
    n_wk: &[u32],
    n_k: &[u32],
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
) -> f64 {
    let (kf, vf) = (k as f64, v as f64);
    let mut words = kf * (ln_gamma(vf * beta) - vf * ln_gamma(beta));
    let lg_beta = ln_gamma(beta);
    for t in 0..k {
        for w in 0..v {
            let c = n_wk[w * k + t];
            if c > 0 {
                words += ln_gamma(c as f64 + beta);
            } else {
                words += lg_beta;
            }
        }
        words -= ln_gamma(n_k[t] as f64 + vf * beta);
    }
    let mut topics = docs.len() as f64 * (ln_gamma(kf * alpha) - kf * ln_gamma(alpha));
    for (d, tokens) in docs.iter().enumerate() {
        for t in 0..k {
            topics += ln_gamma(n_dk[d * k + t] as f64 + alpha);
        }
        topics -= ln_gamma(tokens.len() as f64 + kf * alpha);
    }
    words + topics
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::pipeline::{build_dtm, build_vocabulary, AnalysisParams};
    use crate::synth;

    fn small_dtm() -> DocTermMatrix {
        let corpus = [
            Document::new("a", "fund fund finance water"),
            Document::new("b", "water flood flood"),
            Document::new("c", "fund finance finance"),
        ];
        let vocab = build_vocabulary(&corpus, &AnalysisParams::default()).unwrap();
        build_dtm(&corpus, &vocab)
    }

    fn config(k: usize) -> LdaConfig {
        LdaConfig { k, alpha: 0.1, beta: 0.01, iterations: 50, burn_in: 10, seed: 7 }
    }

    #[test]
    fn single_topic_degenerates() {
        let dtm = small_dtm();
        let model = fit_lda(&dtm, &config(1)).unwrap();
        assert!(model.all_assignments().iter().flatten().all(|a| a.topic == 0));
        for d in 0..model.n_docs() {
            assert_eq!(model.theta_row(d), [1.0]);
        }
        let totals = dtm.term_totals();
        let n: u64 = totals.iter().sum();
        let v = dtm.n_terms() as f64;
        for (w, &c) in totals.iter().enumerate() {
            let expected = (c as f64 + 0.01) / (n as f64 + v * 0.01);
            assert!((model.phi_row(0)[w] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn counts_are_recomputable() {
        let model = fit_lda(&small_dtm(), &config(3)).unwrap();
        model.check_counts().unwrap();
        let total: u32 = (0..3).map(|t| model.topic_total(t)).sum();
        assert_eq!(total as usize, small_dtm().n_tokens());
    }

    #[test]
    fn rows_are_stochastic() {
        let model = fit_lda(&small_dtm(), &config(4)).unwrap();
        for d in 0..model.n_docs() {
            assert!((model.theta_row(d).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for t in 0..4 {
            assert!((model.phi_row(t).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(model.log_likelihood_trace().iter().all(|x| x.is_finite()));
        assert_eq!(model.log_likelihood_trace().len(), 51);
    }

    #[test]
    fn seed_determinism() {
        let dtm = small_dtm();
        let a = fit_lda(&dtm, &config(3)).unwrap();
        let b = fit_lda(&dtm, &config(3)).unwrap();
        assert_eq!(a, b);
        let c = fit_lda(&dtm, &LdaConfig { seed: 8, ..config(3) }).unwrap();
        assert_eq!(c.n_docs(), a.n_docs());
    }

    #[test]
    fn warns_when_topics_exceed_vocabulary() {
        let model = fit_lda(&small_dtm(), &config(9)).unwrap();
        assert_eq!(model.warnings().len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let dtm = small_dtm();
        assert!(matches!(fit_lda(&dtm, &LdaConfig { k: 0, ..config(1) }), Err(TopicError::InvalidConfig(_))));
        assert!(matches!(
            fit_lda(&dtm, &LdaConfig { burn_in: 50, ..config(1) }),
            Err(TopicError::InvalidConfig(_))
        ));
        let empty = DocTermMatrix::from_rows(dtm.vocab().clone(), vec![]);
        assert!(matches!(fit_lda(&empty, &config(2)), Err(TopicError::EmptyDtm)));
        let corpus = [Document::new("x", "zz qq")];
        let filtered = build_dtm(&corpus, dtm.vocab());
        assert!(matches!(fit_lda(&filtered, &config(2)), Err(TopicError::NoTokens)));
    }

    #[test]
    fn cancellation_stops_the_fit() {
        let mut seen = 0;
        let r = fit_lda_observed(&small_dtm(), &config(2), |p| {
            seen = p.sweep;
            if p.sweep == 5 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        assert!(matches!(r, Err(TopicError::Cancelled)));
        assert_eq!(seen, 5);
    }

    #[test]
    fn recovers_two_disjoint_vocabularies() {
        let synth = synth::two_topic_corpus(40, 50, 3);
        let vocab = build_vocabulary(&synth.documents, &AnalysisParams::default()).unwrap();
        let dtm = build_dtm(&synth.documents, &vocab);
        let cfg = LdaConfig { k: 2, alpha: 0.1, beta: 0.01, iterations: 200, burn_in: 100, seed: 11 };
        let model = fit_lda(&dtm, &cfg).unwrap();
        // purity oracle: best of the two topic↔label matchings
        let mut agree = 0usize;
        let mut total = 0usize;
        for (d, labels) in synth.token_topics.iter().enumerate() {
            for (a, &label) in model.assignments(d).iter().zip(labels) {
                agree += (a.topic == label) as usize;
                total += 1;
            }
        }
        let purity = agree.max(total - agree) as f64 / total as f64;
        assert!(purity >= 0.95, "purity {purity}");
        let trace = model.log_likelihood_trace();
        assert!(trace.last().unwrap() > &trace[0]);
    }
}
