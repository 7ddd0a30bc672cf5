//! Supervised coding of documents: a multinomial Naive Bayes reference
//! classifier, active-learning coding sessions, and cross-validated
//! precision / recall / F1.

mod eval;
mod session;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{stream_for, tokenize, DocTermMatrix, Vocabulary};

pub use eval::{evaluate, ClassMetrics, EvalReport};
pub use session::{
    next_query, simulate_active_learning, CodingSession, CurvePoint, LabelRecord, LearningCurve, Query, Strategy,
};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("codebook needs at least two codes")]
    TooFewCodes,
    #[error("duplicate code id {0:?}")]
    DuplicateCode(String),
    #[error("code {0:?} has no labeled documents")]
    EmptyCode(String),
    #[error("unknown code {0:?}")]
    UnknownCode(String),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("document {0:?} is already labeled; pass overwrite to relabel")]
    AlreadyLabeled(String),
    #[error("no candidate documents left to query")]
    EmptyQueue,
    #[error("no posterior for queued document {0:?}")]
    MissingPosterior(String),
    #[error("class {code:?} has {have} labeled documents, {need} needed for stratification")]
    ClassTooSmall { code: String, have: usize, need: usize },
    #[error("at least two folds are required")]
    TooFewFolds,
    #[error("budget {budget} exceeds the {pool} documents available for querying")]
    BudgetExceedsPool { budget: usize, pool: usize },
    #[error("unknown strategy {0:?}")]
    BadStrategy(String),
}

pub type Result<T> = std::result::Result<T, ClassifyError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// Ordered set of codes. Codebook order breaks prediction ties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub codes: Vec<Code>,
}

impl Codebook {
    pub fn new(codes: Vec<Code>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &codes {
            if !seen.insert(c.id.as_str()) {
                return Err(ClassifyError::DuplicateCode(c.id.clone()));
            }
        }
        Ok(Codebook { codes })
    }

    /// Codebook whose ids double as names.
    pub fn from_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        Self::new(
            ids.into_iter()
                .map(|id| Code { id: id.to_string(), name: id.to_string(), description: String::new() })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.codes.iter().position(|c| c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(|c| c.id.as_str())
    }
}

/// Anything that turns a sparse term-count row into a posterior over the
/// codebook.
pub trait Classifier {
    fn codebook(&self) -> &Codebook;

    /// Normalised posterior, in codebook order.
    fn posterior(&self, counts: &[(usize, u32)]) -> Vec<f64>;

    fn predict(&self, counts: &[(usize, u32)]) -> Prediction {
        let posterior = self.posterior(counts);
        let best = argmax(&posterior);
        Prediction { code: self.codebook().codes[best].id.clone(), posterior }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub code: String,
    pub posterior: Vec<f64>,
}

/// First index of the maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Multinomial Naive Bayes with add-one smoothing over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub codebook: Codebook,
    pub n_terms: usize,
    pub log_priors: Vec<f64>,
    /// `log_likelihoods[class][term]`.
    pub log_likelihoods: Vec<Vec<f64>>,
}

impl Classifier for NaiveBayesModel {
    fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    fn posterior(&self, counts: &[(usize, u32)]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(&prior, lik)| {
                prior
                    + counts
                        .iter()
                        .filter(|&&(t, _)| t < self.n_terms)
                        .map(|&(t, c)| c as f64 * lik[t])
                        .sum::<f64>()
            })
            .collect();
        softmax(&scores)
    }
}

impl NaiveBayesModel {
    /// Predicts raw text by tokenizing it under the vocabulary's parameters.
    pub fn predict_text(&self, vocab: &Vocabulary, text: &str) -> Prediction {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for t in stream_for(&tokenize(text, vocab.params()), vocab).iter().filter_map(|e| e.term) {
            *counts.entry(t).or_insert(0) += 1;
        }
        self.predict(&counts.into_iter().collect::<Vec<_>>())
    }
}

pub(crate) fn softmax(log_scores: &[f64]) -> Vec<f64> {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

/// Trains Naive Bayes on the labeled documents of `dtm`.
///
/// Every code of the codebook needs at least one labeled document.
pub fn train(dtm: &DocTermMatrix, codebook: &Codebook, labeled: &BTreeMap<String, String>) -> Result<NaiveBayesModel> {
    if codebook.len() < 2 {
        return Err(ClassifyError::TooFewCodes);
    }
    let (c, v) = (codebook.len(), dtm.n_terms());
    let mut docs = vec![0usize; c];
    let mut term_counts = vec![vec![0u64; v]; c];
    for (doc, code) in labeled {
        let class = codebook.position(code).ok_or_else(|| ClassifyError::UnknownCode(code.clone()))?;
        let row = dtm.row(doc).ok_or_else(|| ClassifyError::UnknownDocument(doc.clone()))?;
        docs[class] += 1;
        for &(t, n) in &row.counts {
            term_counts[class][t] += n as u64;
        }
    }
    if let Some(empty) = docs.iter().position(|&n| n == 0) {
        return Err(ClassifyError::EmptyCode(codebook.codes[empty].id.clone()));
    }
    let n_labeled = labeled.len() as f64;
    let log_priors = docs.iter().map(|&n| (n as f64 / n_labeled).ln()).collect();
    let log_likelihoods = term_counts
        .iter()
        .map(|counts| {
            let total: u64 = counts.iter().sum();
            let denom = (total + v as u64) as f64;
            counts.iter().map(|&n| ((n + 1) as f64 / denom).ln()).collect()
        })
        .collect();
    Ok(NaiveBayesModel { codebook: codebook.clone(), n_terms: v, log_priors, log_likelihoods })
}

/// Predicts the code of a document of `dtm`.
pub fn predict(model: &NaiveBayesModel, dtm: &DocTermMatrix, doc: &str) -> Result<Prediction> {
    let row = dtm.row(doc).ok_or_else(|| ClassifyError::UnknownDocument(doc.to_string()))?;
    Ok(model.predict(&row.counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::pipeline::{build_dtm, build_vocabulary, AnalysisParams};
    use proptest::prelude::*;

    fn setup(bodies: &[(&str, &str)]) -> DocTermMatrix {
        let corpus: Vec<Document> = bodies.iter().map(|(id, b)| Document::new(*id, *b)).collect();
        let vocab = build_vocabulary(&corpus, &AnalysisParams::default()).unwrap();
        build_dtm(&corpus, &vocab)
    }

    fn labels(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(d, c)| (d.to_string(), c.to_string())).collect()
    }

    #[test]
    fn disjoint_evidence() {
        let dtm = setup(&[("1", "fund money"), ("2", "water flood")]);
        let cb = Codebook::from_ids(["finance", "water"]).unwrap();
        let model = train(&dtm, &cb, &labels(&[("1", "finance"), ("2", "water")])).unwrap();
        let p = model.predict_text(dtm.vocab(), "fund");
        assert_eq!(p.code, "finance");
    }

    #[test]
    fn needs_every_code_labeled() {
        let dtm = setup(&[("1", "fund money"), ("2", "water flood")]);
        let cb = Codebook::from_ids(["finance", "water"]).unwrap();
        let err = train(&dtm, &cb, &labels(&[("1", "finance")])).unwrap_err();
        assert_eq!(err.to_string(), "code \"water\" has no labeled documents");
        let single = Codebook::from_ids(["finance"]).unwrap();
        assert!(matches!(train(&dtm, &single, &labels(&[("1", "finance")])), Err(ClassifyError::TooFewCodes)));
        assert!(Codebook::from_ids(["a", "a"]).is_err());
    }

    #[test]
    fn closed_form_posteriors() {
        let docs = [
            ("d1", "fund fund money"),
            ("d2", "fund grant"),
            ("d3", "money grant grant"),
            ("d4", "water flood"),
            ("d5", "flood flood rain"),
            ("d6", "rain water fund"),
            ("d7", "grant water"),
            ("d8", "money rain"),
        ];
        let dtm = setup(&docs);
        let cb = Codebook::from_ids(["fin", "wat"]).unwrap();
        let gold = labels(&[("d1", "fin"), ("d2", "fin"), ("d3", "fin"), ("d4", "wat"), ("d5", "wat"), ("d6", "wat")]);
        let model = train(&dtm, &cb, &gold).unwrap();

        // oracle: count by hand over raw words
        let vocab = ["flood", "fund", "grant", "money", "rain", "water"];
        let count = |ids: &[&str], w: &str| -> f64 {
            ids.iter()
                .map(|id| docs.iter().find(|d| d.0 == *id).unwrap().1.split(' ').filter(|x| *x == w).count())
                .sum::<usize>() as f64
        };
        let fin = ["d1", "d2", "d3"];
        let wat = ["d4", "d5", "d6"];
        let total = |ids: &[&str]| vocab.iter().map(|w| count(ids, w)).sum::<f64>();
        for (doc, text) in [("d7", "grant water"), ("d8", "money rain")] {
            let mut score = [0.5f64, 0.5f64];
            for w in text.split(' ') {
                score[0] *= (count(&fin, w) + 1.0) / (total(&fin) + 6.0);
                score[1] *= (count(&wat, w) + 1.0) / (total(&wat) + 6.0);
            }
            let z = score[0] + score[1];
            let p = predict(&model, &dtm, doc).unwrap();
            assert!((p.posterior[0] - score[0] / z).abs() < 1e-12);
            assert!((p.posterior[1] - score[1] / z).abs() < 1e-12);
        }
        for lik in &model.log_likelihoods {
            assert!((lik.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!((model.log_priors.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_evidence_falls_back_to_priors() {
        let dtm = setup(&[("1", "fund"), ("2", "fund money"), ("3", "water")]);
        let cb = Codebook::from_ids(["a", "b"]).unwrap();
        let model = train(&dtm, &cb, &labels(&[("1", "a"), ("2", "a"), ("3", "b")])).unwrap();
        let p = model.predict(&[]);
        assert!((p.posterior[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.posterior[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(model.predict_text(dtm.vocab(), "unrelated words").posterior, p.posterior);
    }

    #[test]
    fn ties_go_to_codebook_order() {
        let model = NaiveBayesModel {
            codebook: Codebook::from_ids(["x", "y"]).unwrap(),
            n_terms: 1,
            log_priors: vec![0.5f64.ln(), 0.5f64.ln()],
            log_likelihoods: vec![vec![0.0], vec![0.0]],
        };
        assert_eq!(model.predict(&[(0, 3)]).code, "x");
    }

    proptest! {
        #[test]
        fn posterior_is_normalised(counts in prop::collection::vec((0usize..6, 1u32..20), 0..6)) {
            let dtm = setup(&[("1", "fund money grant"), ("2", "water flood rain")]);
            let cb = Codebook::from_ids(["a", "b"]).unwrap();
            let model = train(&dtm, &cb, &labels(&[("1", "a"), ("2", "b")])).unwrap();
            let p = model.posterior(&counts);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn argmax_is_scale_invariant(scores in prop::collection::vec(-50.0f64..50.0, 2..6), shift in -100.0f64..100.0) {
            // adding a constant to log scores multiplies unnormalised scores by a positive factor
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            prop_assert_eq!(argmax(&softmax(&scores)), argmax(&softmax(&shifted)));
        }
    }
}
