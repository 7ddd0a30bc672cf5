//! On-disk model format: one directory per model.
//!
//! ```text
//! config.json        LdaConfig
//! vocabulary.json    terms, document frequencies and preprocessing parameters
//! theta.csv          doc_id,topic_0,...,topic_{K-1}   (D rows)
//! phi.csv            topic,<term>,...                 (K rows)
//! assignments.csv    doc_id,position,term_index,topic
//! labels.json        TopicLabels
//! diagnostics.json   log-likelihood trace and fit warnings
//! ```
//!
//! Numbers in CSV files carry 9 significant digits.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LdaConfig, Result, TokenAssignment, TopicError, TopicLabels, TopicModel};
use crate::interchange::atomic_write;
use crate::numfmt::sig9;
use crate::pipeline::Vocabulary;

#[derive(Serialize, Deserialize)]
struct Diagnostics {
    log_likelihood_trace: Vec<f64>,
    warnings: Vec<String>,
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> TopicError {
    TopicError::Format(e.to_string())
}

pub fn write_theta_csv<W: Write>(model: &TopicModel, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec!["doc_id".to_string()];
    header.extend((0..model.n_topics()).map(|t| format!("topic_{t}")));
    out.write_record(&header).map_err(csv_err)?;
    for (d, id) in model.doc_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(model.theta_row(d).iter().map(|&x| sig9(x)));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_phi_csv<W: Write>(model: &TopicModel, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec!["topic".to_string()];
    header.extend(model.vocab().terms().iter().cloned());
    out.write_record(&header).map_err(csv_err)?;
    for t in 0..model.n_topics() {
        let mut rec = vec![t.to_string()];
        rec.extend(model.phi_row(t).iter().map(|&x| sig9(x)));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn write_assignments_csv<W: Write>(model: &TopicModel, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["doc_id", "position", "term_index", "topic"]).map_err(csv_err)?;
    for (d, id) in model.doc_ids().iter().enumerate() {
        for a in model.assignments(d) {
            out.write_record([id.as_str(), &a.position.to_string(), &a.term.to_string(), &a.topic.to_string()])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(value).map_err(|e| TopicError::Format(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

/// Writes the model directory. Every file is written atomically.
pub fn save_model(model: &TopicModel, labels: &TopicLabels, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    atomic_write(dir.join("config.json"), &json(model.config())?)?;
    atomic_write(dir.join("vocabulary.json"), &json(model.vocab())?)?;
    atomic_write(dir.join("theta.csv"), &render(|b| write_theta_csv(model, b))?)?;
    atomic_write(dir.join("phi.csv"), &render(|b| write_phi_csv(model, b))?)?;
    atomic_write(dir.join("assignments.csv"), &render(|b| write_assignments_csv(model, b))?)?;
    atomic_write(dir.join("labels.json"), &json(labels)?)?;
    let diagnostics = Diagnostics {
        log_likelihood_trace: model.log_likelihood_trace().to_vec(),
        warnings: model.warnings().to_vec(),
    };
    atomic_write(dir.join("diagnostics.json"), &json(&diagnostics)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| TopicError::Format(format!("{}: {e}", path.display())))
}

/// Reads a model directory back. Counts and estimates are rebuilt from the
/// assignments and checked against the stored θ table.
pub fn load_model(dir: impl AsRef<Path>) -> Result<(TopicModel, TopicLabels)> {
    let dir = dir.as_ref();
    let config: LdaConfig = read_json(&dir.join("config.json"))?;
    let vocab: Vocabulary = read_json(&dir.join("vocabulary.json"))?;
    let labels: TopicLabels = if dir.join("labels.json").exists() {
        read_json(&dir.join("labels.json"))?
    } else {
        TopicLabels::default()
    };
    let diagnostics: Diagnostics = if dir.join("diagnostics.json").exists() {
        read_json(&dir.join("diagnostics.json"))?
    } else {
        Diagnostics { log_likelihood_trace: Vec::new(), warnings: Vec::new() }
    };

    let mut theta_reader = csv::Reader::from_path(dir.join("theta.csv")).map_err(csv_err)?;
    let mut doc_ids = Vec::new();
    let mut stored_theta = Vec::new();
    for rec in theta_reader.records() {
        let rec = rec.map_err(csv_err)?;
        doc_ids.push(rec.get(0).unwrap_or_default().to_string());
        let row: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse::<f64>).collect();
        stored_theta.push(row.map_err(|e| TopicError::Format(format!("theta.csv: {e}")))?);
    }
    let index: HashMap<&str, usize> = doc_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();

    let mut assignments: Vec<Vec<TokenAssignment>> = vec![Vec::new(); doc_ids.len()];
    let mut reader = csv::Reader::from_path(dir.join("assignments.csv")).map_err(csv_err)?;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| TopicError::Format(format!("assignments.csv: bad field {i} in {rec:?}")))
        };
        let doc = rec.get(0).unwrap_or_default();
        let d = *index
            .get(doc)
            .ok_or_else(|| TopicError::Format(format!("assignments.csv: unknown document {doc:?}")))?;
        assignments[d].push(TokenAssignment { position: field(1)?, term: field(2)?, topic: field(3)? });
    }

    let mut model = TopicModel::from_assignments(config, vocab, doc_ids, assignments, diagnostics.log_likelihood_trace)?;
    model.warnings = diagnostics.warnings;
    model.check_counts()?;
    for (d, stored) in stored_theta.iter().enumerate() {
        let fresh = model.theta_row(d);
        let agrees = stored.len() == fresh.len()
            && stored.iter().zip(fresh).all(|(a, b)| (a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        if !agrees {
            return Err(TopicError::InconsistentCounts(format!(
                "theta.csv row {} disagrees with assignments",
                model.doc_ids()[d]
            )));
        }
    }
    Ok((model, labels))
}
