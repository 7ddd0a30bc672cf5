//! Computational content-analysis workbench.
//!
//! The crate covers the whole desk-scale workflow of a quantitative/qualitative
//! text study:
//!
//! - [`corpus`]: documents, CSV/TSV/plain-text import with field mapping,
//!   gazetteer entity tagging and shingle-based deduplication.
//! - [`pipeline`]: the parameterised preprocessing surface ([`pipeline::AnalysisParams`]),
//!   vocabulary construction and the document-term matrix.
//! - [`cooccurrence`]: term frequencies, time series and Dice / PMI / log-likelihood
//!   co-occurrence.
//! - [`topics`]: LDA via collapsed Gibbs sampling, UMass coherence, relevance-ranked
//!   top words, per-token highlighting, thematic filtering and metadata contrast.
//! - [`classify`]: multinomial Naive Bayes, active-learning coding sessions and
//!   cross-validated precision / recall / F1.
//! - [`interchange`]: CSV exports and a REFI-QDA (QDPX) subset.
//!
//! [`synth`] generates the synthetic corpora used by the examples and tests.

pub mod classify;
pub mod cooccurrence;
pub mod corpus;
pub mod interchange;
pub mod numfmt;
pub mod pipeline;
pub mod synth;
pub mod text;
pub mod topics;

pub use classify::{Codebook, CodingSession, EvalReport, NaiveBayesModel, Strategy};
pub use cooccurrence::{ContextUnit, CooccurrenceResult, Measure};
pub use corpus::{Document, EntityKind, EntitySpan, Gazetteer, ImportMapping};
pub use pipeline::{AnalysisParams, DocTermMatrix, Vocabulary};
pub use topics::{LdaConfig, TopicLabels, TopicModel};
