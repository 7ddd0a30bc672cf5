//! Export coded documents as a QDPX project for other QDA tools, read it
//! back, and write the corpus and label CSVs next to it.
//!
//! ```text
//! cargo run -p cm-core --example qdpx_exchange -- /tmp/qdpx-demo
//! ```

use std::path::PathBuf;

use cm_core::interchange::{export_corpus_csv, export_labels_csv, export_qdpx, import_qdpx, QdpxProject};
use cm_core::synth::coding_corpus;
use cm_core::{Codebook, CodingSession, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cm-qdpx"));
    std::fs::create_dir_all(&out)?;

    let (docs, gold) = coding_corpus(12, 8, 0.8, 1);
    let codebook = Codebook::from_ids(["mitigation", "adaptation"])?;
    let mut session = CodingSession::new(codebook.clone(), Strategy::Entropy, docs.iter().map(|d| d.id.clone()));
    for id in docs.iter().map(|d| &d.id).take(6) {
        session.record_label(id, &gold[id], "coder", false)?;
    }

    let project = QdpxProject::from_coding("demo", 7, &docs, &codebook, &session.label_map())?;
    let path = out.join("demo.qdpx");
    export_qdpx(&project, &path)?;
    export_corpus_csv(&docs, out.join("corpus.csv"))?;
    export_labels_csv(&session, out.join("labels.csv"))?;
    println!("wrote {} sources, {} selections to {}", project.sources.len(), project.selections.len(), path.display());

    let back = import_qdpx(&path)?;
    assert_eq!(back.project, project);
    for w in &back.warnings {
        println!("warning: {w}");
    }
    for sel in back.project.selections.iter().take(3) {
        let source = back.project.sources.iter().find(|s| s.guid == sel.source_guid).unwrap();
        let code = back.project.codes.iter().find(|c| c.guid == sel.code_guid).unwrap();
        println!("  {} [{}..{}] -> {}", source.document_id, sel.start, sel.end, code.name);
    }
    Ok(())
}
