//! An interactive-style coding session driven by gold labels, a simulated
//! comparison of query strategies, and cross-validated metrics.
//!
//! ```text
//! cargo run --release -p cm-core --example active_learning
//! ```

use cm_core::classify::{evaluate, simulate_active_learning};
use cm_core::pipeline::{build_dtm, build_vocabulary, AnalysisParams};
use cm_core::synth::coding_corpus;
use cm_core::{Codebook, CodingSession, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (docs, gold) = coding_corpus(200, 10, 0.5, 3);
    let vocab = build_vocabulary(&docs, &AnalysisParams::default())?;
    let dtm = build_dtm(&docs, &vocab);
    let codebook = Codebook::from_ids(["mitigation", "adaptation"])?;

    // a coder answering the first dozen queries
    let mut session = CodingSession::new(codebook.clone(), Strategy::Entropy, docs.iter().map(|d| d.id.clone()));
    for _ in 0..12 {
        let q = session.next(&dtm)?;
        let code = &gold[&q.doc_id];
        let shown = q.posterior.map(|p| format!("{:.2}/{:.2}", p[0], p[1])).unwrap_or_else(|| "-".into());
        println!("model v{:<2} asks {}  posterior {shown:<9}  coded {code}", q.model_version, q.doc_id);
        session.record_label(&q.doc_id, code, "coder", false)?;
        if session.can_train() {
            session.retrain(&dtm)?;
        }
    }

    println!("\nlabels needed to reach 90% held-out accuracy:");
    for strategy in [Strategy::Entropy, Strategy::Margin, Strategy::LeastConfidence, Strategy::Random { seed: 3 }] {
        let curve = simulate_active_learning(&dtm, &codebook, &gold, strategy, 80, 3)?;
        let n = curve.labels_to_reach(0.9).map(|n| n.to_string()).unwrap_or_else(|| "not reached".into());
        println!("  {:<16} {n}", strategy.to_string());
    }

    let report = evaluate(&dtm, &codebook, &gold, 5, 42)?;
    println!("\n5-fold cross-validation on all gold labels:");
    for m in &report.per_class {
        println!("  {:<11} P {:.3}  R {:.3}  F1 {:.3}  (n={})", m.code, m.precision, m.recall, m.f1, m.support);
    }
    println!("  macro F1 {:.3}, accuracy {:.3}", report.macro_f1, report.accuracy);
    Ok(())
}
