#[path = "support/oracles.rs"]
mod oracles;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cm_core::pipeline::{build_dtm, build_vocabulary, AnalysisParams};
use cm_core::synth::two_topic_corpus;
use cm_core::topics::{coherence_umass, fit_lda, LdaConfig};

fn fitted(seed: u64, iterations: usize) -> (cm_core::synth::SyntheticCorpus, cm_core::pipeline::DocTermMatrix, cm_core::TopicModel) {
    let synth = two_topic_corpus(40, 30, seed);
    let vocab = build_vocabulary(&synth.documents, &AnalysisParams::default()).unwrap();
    assert_eq!(vocab.len(), 20);
    let dtm = build_dtm(&synth.documents, &vocab);
    let mut cfg = LdaConfig::new(2);
    cfg.iterations = iterations;
    cfg.burn_in = iterations / 2;
    cfg.seed = seed;
    let model = fit_lda(&dtm, &cfg).unwrap();
    (synth, dtm, model)
}

#[test]
fn recovers_disjoint_topics() {
    let (synth, _, model) = fitted(11, 1000);
    let pairs: Vec<(usize, usize)> = model
        .all_assignments()
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| doc.iter().map(move |a| (a.topic, d)))
        .map(|(topic, d)| (topic, synth.token_topics[d][0]))
        .collect();
    assert_eq!(pairs.len(), 40 * 30);
    assert!(oracles::purity(&pairs, 2) >= 0.95);
}

#[test]
fn estimates_are_distributions_and_counts_follow_assignments() {
    let (_, _, model) = fitted(12, 200);
    for d in 0..model.n_docs() {
        assert!((model.theta_row(d).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    for k in 0..model.n_topics() {
        assert!((model.phi_row(k).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    let (ndk, nkw) = oracles::recount(&model);
    for (d, row) in ndk.iter().enumerate() {
        for (k, &c) in row.iter().enumerate() {
            assert_eq!(model.doc_topic_count(d, k), c);
        }
    }
    for (k, row) in nkw.iter().enumerate() {
        for (w, &c) in row.iter().enumerate() {
            assert_eq!(model.topic_term_count(k, w), c);
        }
        assert_eq!(model.topic_total(k), row.iter().sum::<u32>());
    }
    // θ from counts, written out
    let cfg = model.config();
    for d in 0..model.n_docs() {
        let nd: u32 = ndk[d].iter().sum();
        for k in 0..2 {
            let expect = (ndk[d][k] as f64 + cfg.alpha) / (nd as f64 + 2.0 * cfg.alpha);
            assert!((model.theta_row(d)[k] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn coherence_matches_oracle_and_beats_permuted_topics() {
    let (synth, dtm, model) = fitted(13, 500);
    let terms = model.vocab().terms().to_vec();
    let doc_sets: Vec<BTreeSet<String>> = synth
        .documents
        .iter()
        .map(|d| d.body.split(' ').map(str::to_string).collect())
        .collect();
    let lib = coherence_umass(&model, &dtm, 10).unwrap();
    let mut recovered = 0.0;
    for k in 0..2 {
        let top = oracles::top_by_weight(model.phi_row(k), &terms, 10);
        let c = oracles::umass(&top, &doc_sets);
        assert!((lib.scores[k] - c).abs() < 1e-9);
        recovered += c / 2.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let mut permuted = 0.0;
        for k in 0..2 {
            let mut row = model.phi_row(k).to_vec();
            row.shuffle(&mut rng);
            permuted += oracles::umass(&oracles::top_by_weight(&row, &terms, 10), &doc_sets) / 2.0;
        }
        assert!(permuted < recovered, "{permuted} >= {recovered}");
    }
}
