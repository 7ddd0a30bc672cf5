use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, Classifier, ClassifyError, Codebook, EvalReport, NaiveBayesModel, Result};
use crate::pipeline::DocTermMatrix;

/// How the next document to code is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// Highest Shannon entropy of the posterior.
    Entropy,
    /// Smallest gap between the two most probable codes.
    Margin,
    /// Lowest top probability.
    LeastConfidence,
    /// Seeded uniform draw.
    Random { seed: u64 },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Entropy => f.write_str("entropy"),
            Strategy::Margin => f.write_str("margin"),
            Strategy::LeastConfidence => f.write_str("least_confidence"),
            Strategy::Random { seed } => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "entropy" => Ok(Strategy::Entropy),
            "margin" => Ok(Strategy::Margin),
            "least_confidence" | "least-confidence" => Ok(Strategy::LeastConfidence),
            "random" => Ok(Strategy::Random { seed: 0 }),
            _ => lower
                .strip_prefix("random:")
                .and_then(|n| n.parse().ok())
                .map(|seed| Strategy::Random { seed })
                .ok_or_else(|| ClassifyError::BadStrategy(s.to_string())),
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = ClassifyError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

/// Informativeness of a posterior under `strategy`; larger is queried first.
fn informativeness(strategy: Strategy, p: &[f64]) -> f64 {
    match strategy {
        Strategy::Entropy => -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>(),
        Strategy::Margin => {
            let mut sorted = p.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            -(sorted[0] - sorted.get(1).copied().unwrap_or(0.0))
        }
        Strategy::LeastConfidence => -p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Strategy::Random { .. } => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub code: String,
    pub author: String,
    pub timestamp: DateTime<Utc>,
}

/// The state of one coder's active-learning session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingSession {
    pub codebook: Codebook,
    pub strategy: Strategy,
    pub labeled: BTreeMap<String, LabelRecord>,
    /// Unlabeled candidates, sorted by id.
    pub queue: Vec<String>,
    pub model: Option<NaiveBayesModel>,
    /// Incremented on every retrain; 0 means no model yet.
    pub model_version: u64,
    pub needs_retrain: bool,
    pub metrics_history: Vec<EvalReport>,
}

/// A queued document chosen for coding, with the model version that chose it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub doc_id: String,
    pub model_version: u64,
    pub posterior: Option<Vec<f64>>,
}

impl CodingSession {
    pub fn new(codebook: Codebook, strategy: Strategy, candidates: impl IntoIterator<Item = String>) -> Self {
        let mut queue: Vec<String> = candidates.into_iter().collect();
        queue.sort();
        queue.dedup();
        CodingSession {
            codebook,
            strategy,
            labeled: BTreeMap::new(),
            queue,
            model: None,
            model_version: 0,
            needs_retrain: false,
            metrics_history: Vec::new(),
        }
    }

    pub fn record_label(&mut self, doc: &str, code: &str, author: &str, overwrite: bool) -> Result<()> {
        self.record_label_at(doc, code, author, overwrite, Utc::now())
    }

    /// Moves `doc` from the queue to the labeled set. Relabeling a labeled
    /// document requires `overwrite`.
    pub fn record_label_at(
        &mut self,
        doc: &str,
        code: &str,
        author: &str,
        overwrite: bool,
        timestamp: DateTime<Utc>,
    ) -> Result<()> {
        if self.codebook.position(code).is_none() {
            return Err(ClassifyError::UnknownCode(code.to_string()));
        }
        let record = LabelRecord { code: code.to_string(), author: author.to_string(), timestamp };
        if let Ok(pos) = self.queue.binary_search_by(|d| d.as_str().cmp(doc)) {
            self.queue.remove(pos);
        } else if self.labeled.contains_key(doc) {
            if !overwrite {
                return Err(ClassifyError::AlreadyLabeled(doc.to_string()));
            }
        } else {
            return Err(ClassifyError::UnknownDocument(doc.to_string()));
        }
        self.labeled.insert(doc.to_string(), record);
        self.needs_retrain = true;
        Ok(())
    }

    /// Document id → code id.
    pub fn label_map(&self) -> BTreeMap<String, String> {
        self.labeled.iter().map(|(d, r)| (d.clone(), r.code.clone())).collect()
    }

    /// Whether every code has at least one label, so a model can be trained.
    pub fn can_train(&self) -> bool {
        self.codebook.len() >= 2 && self.codebook.ids().all(|c| self.labeled.values().any(|r| r.code == c))
    }

    pub fn retrain(&mut self, dtm: &DocTermMatrix) -> Result<()> {
        let model = train(dtm, &self.codebook, &self.label_map())?;
        self.install_model(model);
        Ok(())
    }

    /// Installs a model trained elsewhere (e.g. by a background job).
    pub fn install_model(&mut self, model: NaiveBayesModel) {
        self.model = Some(model);
        self.model_version += 1;
        self.needs_retrain = false;
    }

    /// Posteriors of the queued documents under the current model.
    pub fn posteriors(&self, dtm: &DocTermMatrix) -> BTreeMap<String, Vec<f64>> {
        let Some(model) = &self.model else { return BTreeMap::new() };
        self.queue
            .iter()
            .filter_map(|id| dtm.row(id).map(|row| (id.clone(), model.posterior(&row.counts))))
            .collect()
    }

    /// Next document to code. Without a model yet, falls back to the first
    /// queued id.
    pub fn next(&self, dtm: &DocTermMatrix) -> Result<Query> {
        if self.queue.is_empty() {
            return Err(ClassifyError::EmptyQueue);
        }
        if self.model.is_none() && !matches!(self.strategy, Strategy::Random { .. }) {
            return Ok(Query { doc_id: self.queue[0].clone(), model_version: 0, posterior: None });
        }
        let posteriors = self.posteriors(dtm);
        let doc_id = next_query(self, &posteriors)?;
        let posterior = posteriors.get(&doc_id).cloned();
        Ok(Query { doc_id, model_version: self.model_version, posterior })
    }
}

/// Picks the most informative queued document under the session's strategy.
/// Ties go to the smallest document id. `Random` ignores the posteriors and
/// draws from a generator seeded by the strategy seed and the number of
/// labels so far.
pub fn next_query(session: &CodingSession, posteriors: &BTreeMap<String, Vec<f64>>) -> Result<String> {
    if session.queue.is_empty() {
        return Err(ClassifyError::EmptyQueue);
    }
    if let Strategy::Random { seed } = session.strategy {
        let mix = seed ^ (session.labeled.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let pick = rng.random_range(0..session.queue.len());
        return Ok(session.queue[pick].clone());
    }
    let mut best: Option<(&str, f64)> = None;
    for id in &session.queue {
        let p = posteriors.get(id).ok_or_else(|| ClassifyError::MissingPosterior(id.clone()))?;
        let score = informativeness(session.strategy, p);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((id, score));
        }
    }
    Ok(best.expect("queue non-empty").0.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub labels: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub seed: u64,
    pub holdout: usize,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// Labels used when held-out accuracy first reaches `target`.
    pub fn labels_to_reach(&self, target: f64) -> Option<usize> {
        self.points.iter().find(|p| p.accuracy >= target).map(|p| p.labels)
    }
}

pub const HOLDOUT_SHARE: f64 = 0.3;

/// Replays an active-learning coding loop against gold labels.
///
/// A stratified 30% holdout is drawn with `seed`; the loop starts from the
/// first pool document (by id) of every code, then `budget` times queries,
/// reveals the gold code and retrains. Each curve point is the holdout
/// accuracy after training.
pub fn simulate_active_learning(
    dtm: &DocTermMatrix,
    codebook: &Codebook,
    gold: &BTreeMap<String, String>,
    strategy: Strategy,
    budget: usize,
    seed: u64,
) -> Result<LearningCurve> {
    let mut by_class: Vec<Vec<&str>> = vec![Vec::new(); codebook.len()];
    for (doc, code) in gold {
        let class = codebook.position(code).ok_or_else(|| ClassifyError::UnknownCode(code.clone()))?;
        if dtm.row(doc).is_none() {
            return Err(ClassifyError::UnknownDocument(doc.clone()));
        }
        by_class[class].push(doc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holdout = Vec::new();
    let mut pool = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let n_hold = (members.len() as f64 * HOLDOUT_SHARE).round() as usize;
        holdout.extend(members[..n_hold].iter().copied());
        pool.extend(members[n_hold..].iter().map(|s| s.to_string()));
    }
    pool.sort();

    let mut session = CodingSession::new(codebook.clone(), strategy, pool.iter().cloned());
    let mut seeds = Vec::new();
    for code in codebook.ids() {
        let first = pool
            .iter()
            .find(|d| gold[d.as_str()] == code)
            .ok_or_else(|| ClassifyError::EmptyCode(code.to_string()))?;
        seeds.push(first.clone());
    }
    let available = pool.len() - seeds.len();
    if budget > available {
        return Err(ClassifyError::BudgetExceedsPool { budget, pool: available });
    }
    let epoch = DateTime::<Utc>::UNIX_EPOCH;
    for doc in &seeds {
        session.record_label_at(doc, &gold[doc.as_str()], "simulation", false, epoch)?;
    }

    let accuracy = |model: &NaiveBayesModel| -> f64 {
        let hits = holdout
            .iter()
            .filter(|d| {
                let row = dtm.row(d).expect("checked above");
                model.predict(&row.counts).code == gold[**d]
            })
            .count();
        hits as f64 / holdout.len().max(1) as f64
    };

    let mut points = Vec::with_capacity(budget + 1);
    for step in 0..=budget {
        session.retrain(dtm)?;
        let model = session.model.as_ref().expect("just trained");
        points.push(CurvePoint { labels: session.labeled.len(), accuracy: accuracy(model) });
        if step == budget {
            break;
        }
        let doc = next_query(&session, &session.posteriors(dtm))?;
        session.record_label_at(&doc, &gold[doc.as_str()], "simulation", false, epoch)?;
    }
    Ok(LearningCurve { strategy, seed, holdout: holdout.len(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::pipeline::{build_dtm, build_vocabulary, AnalysisParams};
    use crate::synth;

    fn session(ids: &[&str], strategy: Strategy) -> CodingSession {
        CodingSession::new(
            Codebook::from_ids(["a", "b"]).unwrap(),
            strategy,
            ids.iter().map(|s| s.to_string()),
        )
    }

    fn posts(entries: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        entries.iter().map(|(d, p)| (d.to_string(), p.to_vec())).collect()
    }

    #[test]
    fn uncertain_document_wins_under_every_criterion() {
        let p = posts(&[("d1", &[0.9, 0.1]), ("d2", &[0.55, 0.45])]);
        for strategy in [Strategy::Entropy, Strategy::Margin, Strategy::LeastConfidence] {
            assert_eq!(next_query(&session(&["d1", "d2"], strategy), &p).unwrap(), "d2");
        }
    }

    #[test]
    fn singleton_and_empty_queues() {
        let p = posts(&[("only", &[0.99, 0.01])]);
        assert_eq!(next_query(&session(&["only"], Strategy::Margin), &p).unwrap(), "only");
        assert_eq!(next_query(&session(&["only"], Strategy::Random { seed: 3 }), &p).unwrap(), "only");
        assert!(matches!(next_query(&session(&[], Strategy::Entropy), &p), Err(ClassifyError::EmptyQueue)));
    }

    #[test]
    fn entropy_matches_brute_force_scan() {
        let raw: [[f64; 3]; 10] = [
            [0.7, 0.2, 0.1],
            [0.4, 0.3, 0.3],
            [0.34, 0.33, 0.33],
            [0.9, 0.05, 0.05],
            [0.5, 0.5, 0.0],
            [0.6, 0.3, 0.1],
            [0.2, 0.2, 0.6],
            [0.1, 0.8, 0.1],
            [0.33, 0.34, 0.33],
            [0.45, 0.45, 0.1],
        ];
        let ids: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let p: BTreeMap<String, Vec<f64>> = ids.iter().cloned().zip(raw.iter().map(|r| r.to_vec())).collect();
        let mut s = CodingSession::new(Codebook::from_ids(["x", "y", "z"]).unwrap(), Strategy::Entropy, ids.clone());
        s.queue.sort();
        let entropy = |r: &[f64; 3]| -> f64 { r.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum() };
        let mut best = 0;
        for i in 1..10 {
            if entropy(&raw[i]) > entropy(&raw[best]) {
                best = i;
            }
        }
        assert_eq!(next_query(&s, &p).unwrap(), ids[best]);
    }

    #[test]
    fn ties_break_by_id() {
        let p = posts(&[("b", &[0.5, 0.5]), ("a", &[0.5, 0.5])]);
        assert_eq!(next_query(&session(&["b", "a"], Strategy::Entropy), &p).unwrap(), "a");
    }

    #[test]
    fn labeling_moves_documents() {
        let mut s = session(&["d1", "d2"], Strategy::Entropy);
        s.record_label("d1", "a", "me", false).unwrap();
        assert!(s.labeled.contains_key("d1"));
        assert!(!s.queue.contains(&"d1".to_string()));
        assert!(s.needs_retrain);
        assert!(matches!(s.record_label("d2", "zzz", "me", false), Err(ClassifyError::UnknownCode(_))));
        assert!(matches!(s.record_label("d9", "a", "me", false), Err(ClassifyError::UnknownDocument(_))));
        assert!(matches!(s.record_label("d1", "b", "me", false), Err(ClassifyError::AlreadyLabeled(_))));
        s.record_label("d1", "b", "me", true).unwrap();
        assert_eq!(s.labeled["d1"].code, "b");
        let p = posts(&[("d1", &[0.5, 0.5]), ("d2", &[0.9, 0.1])]);
        assert_eq!(next_query(&s, &p).unwrap(), "d2");
    }

    #[test]
    fn replaying_transitions_reproduces_state() {
        let ids = ["n1", "n2", "n3", "n4", "n5", "n6"];
        let steps = [("n3", "a"), ("n1", "b"), ("n5", "a"), ("n2", "a"), ("n6", "b")];
        let t = DateTime::<Utc>::UNIX_EPOCH;
        let mut live = session(&ids, Strategy::Margin);
        for (d, c) in steps {
            live.record_label_at(d, c, "coder", false, t).unwrap();
        }
        let mut replay = session(&ids, Strategy::Margin);
        for (d, c) in steps.iter().rev().collect::<Vec<_>>().into_iter().rev() {
            replay.record_label_at(d, c, "coder", false, t).unwrap();
        }
        assert_eq!(live, replay);
        assert_eq!(live.queue, ["n4"]);
        assert_eq!(live.labeled.len(), 5);
    }

    #[test]
    fn strategies_parse() {
        assert_eq!("random:7".parse::<Strategy>().unwrap(), Strategy::Random { seed: 7 });
        assert_eq!("least-confidence".parse::<Strategy>().unwrap(), Strategy::LeastConfidence);
        assert!("best".parse::<Strategy>().is_err());
        let json = serde_json::to_string(&Strategy::Random { seed: 2 }).unwrap();
        assert_eq!(json, "\"random:2\"");
    }

    fn coding_dtm(n: usize) -> (DocTermMatrix, BTreeMap<String, String>, Codebook) {
        let (docs, gold) = synth::coding_corpus(n, 12, 0.4, 5);
        let vocab = build_vocabulary(&docs, &AnalysisParams::default()).unwrap();
        (build_dtm(&docs, &vocab), gold, Codebook::from_ids(["mitigation", "adaptation"]).unwrap())
    }

    #[test]
    fn zero_budget_has_only_the_seed_point() {
        let (dtm, gold, cb) = coding_dtm(40);
        let curve = simulate_active_learning(&dtm, &cb, &gold, Strategy::Entropy, 0, 1).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].labels, 2);
        assert_eq!(curve.holdout, 12);
    }

    #[test]
    fn strategies_share_the_first_point() {
        let (dtm, gold, cb) = coding_dtm(40);
        let e = simulate_active_learning(&dtm, &cb, &gold, Strategy::Entropy, 5, 4).unwrap();
        let r = simulate_active_learning(&dtm, &cb, &gold, Strategy::Random { seed: 4 }, 5, 4).unwrap();
        assert_eq!(e.points[0], r.points[0]);
        assert_eq!(e.points.len(), 6);
        assert_eq!(e, simulate_active_learning(&dtm, &cb, &gold, Strategy::Entropy, 5, 4).unwrap());
    }

    #[test]
    fn budget_is_bounded_by_the_pool() {
        let (dtm, gold, cb) = coding_dtm(10);
        // 10 docs: 3 held out per class rounding 1.5 -> 2, pool 6, minus 2 seeds
        assert!(matches!(
            simulate_active_learning(&dtm, &cb, &gold, Strategy::Entropy, 5, 0),
            Err(ClassifyError::BudgetExceedsPool { budget: 5, pool: 4 })
        ));
        let stray = [Document::new("zz", "unrelated")];
        let mut bad_gold = gold.clone();
        bad_gold.insert(stray[0].id.clone(), "mitigation".into());
        assert!(simulate_active_learning(&dtm, &cb, &bad_gold, Strategy::Entropy, 1, 0).is_err());
    }
}
