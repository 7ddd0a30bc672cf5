use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, Classifier, ClassifyError, Codebook, Result};
use crate::pipeline::DocTermMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub code: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold documents of this class.
    pub support: u64,
}

/// Precision, recall and F1 from a confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`, codebook order.
    pub confusion: Vec<Vec<u64>>,
    pub folds: usize,
    pub seed: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    /// Zero denominators give 0 for precision, recall and F1.
    pub fn from_confusion(codes: &[String], confusion: Vec<Vec<u64>>, folds: usize, seed: u64) -> Self {
        let c = codes.len();
        assert!(confusion.len() == c && confusion.iter().all(|r| r.len() == c), "confusion must be {c}x{c}");
        let mut per_class = Vec::with_capacity(c);
        let (mut tp_all, mut fp_all, mut fn_all, mut total) = (0, 0, 0, 0);
        for i in 0..c {
            let tp = confusion[i][i];
            let gold: u64 = confusion[i].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[i]).sum();
            let (precision, recall) = (ratio(tp, predicted), ratio(tp, gold));
            per_class.push(ClassMetrics {
                code: codes[i].clone(),
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: gold,
            });
            tp_all += tp;
            fp_all += predicted - tp;
            fn_all += gold - tp;
            total += gold;
        }
        let mean = |f: fn(&ClassMetrics) -> f64| -> f64 {
            if c == 0 {
                0.0
            } else {
                per_class.iter().map(f).sum::<f64>() / c as f64
            }
        };
        let micro_precision = ratio(tp_all, tp_all + fp_all);
        let micro_recall = ratio(tp_all, tp_all + fn_all);
        EvalReport {
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            micro_precision,
            micro_recall,
            micro_f1: harmonic(micro_precision, micro_recall),
            accuracy: ratio(tp_all, total),
            per_class,
            confusion,
            folds,
            seed,
        }
    }
}

/// Stratified k-fold cross-validation of Naive Bayes on the labeled
/// documents.
///
/// Within each code the document ids are sorted, shuffled with `seed` and
/// dealt round-robin into folds, so the result does not depend on the order
/// of `labeled`.
pub fn evaluate(
    dtm: &DocTermMatrix,
    codebook: &Codebook,
    labeled: &BTreeMap<String, String>,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    if folds < 2 {
        return Err(ClassifyError::TooFewFolds);
    }
    if codebook.len() < 2 {
        return Err(ClassifyError::TooFewCodes);
    }
    let mut by_class: Vec<Vec<&String>> = vec![Vec::new(); codebook.len()];
    for (doc, code) in labeled {
        let class = codebook.position(code).ok_or_else(|| ClassifyError::UnknownCode(code.clone()))?;
        by_class[class].push(doc);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < folds {
            return Err(ClassifyError::ClassTooSmall {
                code: codebook.codes[class].id.clone(),
                have: members.len(),
                need: folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of: BTreeMap<&String, usize> = BTreeMap::new();
    for members in &mut by_class {
        members.sort();
        members.shuffle(&mut rng);
        for (i, doc) in members.iter().enumerate() {
            fold_of.insert(doc, i % folds);
        }
    }

    let c = codebook.len();
    let mut confusion = vec![vec![0u64; c]; c];
    for fold in 0..folds {
        let training: BTreeMap<String, String> = labeled
            .iter()
            .filter(|(d, _)| fold_of[d] != fold)
            .map(|(d, c)| (d.clone(), c.clone()))
            .collect();
        let model = train(dtm, codebook, &training)?;
        for (doc, code) in labeled.iter().filter(|(d, _)| fold_of[d] == fold) {
            let row = dtm.row(doc).ok_or_else(|| ClassifyError::UnknownDocument(doc.clone()))?;
            let predicted = super::argmax(&model.posterior(&row.counts));
            let gold = codebook.position(code).expect("checked above");
            confusion[gold][predicted] += 1;
        }
    }
    let codes: Vec<String> = codebook.ids().map(String::from).collect();
    Ok(EvalReport::from_confusion(&codes, confusion, folds, seed))
}
