//! Fit LDA to a synthetic NDC-style corpus with place and funder names
//! removed, then read the model: relevance-ranked words, coherence, topic
//! filtering, metadata contrast and token highlighting.
//!
//! ```text
//! cargo run --release -p cm-core --example topic_model
//! ```

use std::collections::BTreeSet;

use cm_core::corpus::tag_entities;
use cm_core::pipeline::{blacklist_from_entities, build_dtm, build_vocabulary, AnalysisParams};
use cm_core::synth::{ndc_gazetteer, ndc_style_corpus};
use cm_core::topics::{coherence_umass, filter_by_topic, fit_lda_observed, highlight, top_words, topic_by_metadata};
use cm_core::{EntityKind, LdaConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gazetteer = ndc_gazetteer();
    let corpus: Vec<_> = ndc_style_corpus(8, 6, 2024).into_iter().map(|d| tag_entities(d, &gazetteer)).collect();

    let kinds = BTreeSet::from([EntityKind::Location, EntityKind::Organization]);
    let mut params = AnalysisParams { remove_stopwords: true, ..AnalysisParams::default() };
    params.blacklist = blacklist_from_entities(&corpus, &kinds);
    let vocab = build_vocabulary(&corpus, &params)?;
    let dtm = build_dtm(&corpus, &vocab);

    let mut config = LdaConfig::new(10);
    config.alpha = 0.1;
    config.iterations = 400;
    config.burn_in = 200;
    config.seed = 42;
    let model = fit_lda_observed(&dtm, &config, |p| {
        if p.sweep % 100 == 0 {
            eprintln!("sweep {:>4}  log-likelihood {:.1}", p.sweep, p.log_likelihood);
        }
        std::ops::ControlFlow::Continue(())
    })?;

    let coherence = coherence_umass(&model, &dtm, 10)?;
    for k in 0..model.n_topics() {
        let words: Vec<String> = top_words(&model, k, 6, 0.6)?.into_iter().map(|t| t.term).collect();
        println!("topic {k:>2}  umass {:>7.2}  {}", coherence.scores[k], words.join(" "));
    }

    let finance = (0..model.n_topics())
        .find(|&k| top_words(&model, k, 12, 1.0).unwrap().iter().any(|t| t.term == "financing"))
        .expect("a finance topic");
    let docs = filter_by_topic(&model, finance, 0.5)?;
    println!("\n{} documents with at least half their tokens in topic {finance}", docs.len());

    println!("\nmean topic share by annex group:");
    for g in topic_by_metadata(&model, &corpus, "annex")? {
        let (best, share) = g.mean_theta.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        println!("  {:<10} n={:<3} strongest topic {best} ({share:.3})", g.group, g.size);
    }

    let doc = &docs[0].id;
    let body = &corpus.iter().find(|d| &d.id == doc).unwrap().body;
    let spans = highlight(&model, &dtm, doc, finance, 0.5)?;
    let chars: Vec<char> = body.chars().collect();
    let marked: Vec<String> = spans.iter().map(|s| chars[s.start..s.end].iter().collect()).collect();
    println!("\nhighlighted in {doc}: {}", marked.join(", "));
    Ok(())
}
