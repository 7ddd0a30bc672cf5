//! Term frequencies, a yearly time series and the strongest co-occurring
//! pairs under all three association measures.
//!
//! ```text
//! cargo run -p cm-core --example cooccurrence
//! ```

use cm_core::cooccurrence::{cooccurrences, term_frequencies, time_series, CoocOptions, Granularity};
use cm_core::pipeline::{build_dtm, build_vocabulary, AnalysisParams};
use cm_core::synth::ndc_style_corpus;
use cm_core::{ContextUnit, Measure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = ndc_style_corpus(6, 6, 7);
    let params = AnalysisParams { remove_stopwords: true, ..AnalysisParams::default() };
    let vocab = build_vocabulary(&corpus, &params)?;
    let dtm = build_dtm(&corpus, &vocab);
    println!("{} documents, {} terms", corpus.len(), vocab.len());

    println!("\nmost frequent:");
    for f in term_frequencies(&dtm, 8) {
        println!("  {:<14} {:>5} in {} docs", f.term, f.count, f.doc_freq);
    }

    let series = time_series(&corpus, &vocab, "solar", Granularity::Year)?;
    println!("\n\"solar\" per year:");
    for p in &series.points {
        println!("  {}  {}", p.period, p.count);
    }

    for measure in [Measure::Dice, Measure::Pmi, Measure::Loglik] {
        let options = CoocOptions { unit: ContextUnit::Sentence, measure, min_pair_count: 3, top_n: Some(5) };
        let result = cooccurrences(&corpus, &vocab, &options)?;
        println!("\ntop pairs by {}:", measure.as_str());
        for p in &result.pairs {
            println!("  {:<14} {:<14} n_ab={:<3} {:.4}", p.term_a, p.term_b, p.counts.n_ab, p.score);
        }
    }
    Ok(())
}
