//! Kind-specific job options and the work each job kind does.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cm_core::classify::{evaluate, simulate_active_learning, EvalReport, Strategy};
use cm_core::cooccurrence::{term_frequencies, ContextUnit, CoocOptions, Measure};
use cm_core::corpus::{deduplicate, import_csv_reader, tag_entities, Document, Gazetteer, ImportMapping, ImportReport};
use cm_core::interchange::{qdpx_bytes, write_corpus_csv, write_eval_csv, write_labels_csv, QdpxProject};
use cm_core::pipeline::AnalysisParams;
use cm_core::topics::{load_model, save_model, top_words, TopicLabels};

use super::store::{JobKind, JobRequest, ModelMeta, SessionRecord, Store};
use crate::analysis::{self, default_seed, LdaSettings};
use crate::error::{Error, FieldError, Result};

/// Deserializes `value` (null counts as `{}`), reporting errors at their
/// path below `prefix`.
pub fn parse_at<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> Result<T> {
    let owned;
    let value = if value.is_null() {
        owned = serde_json::json!({});
        &owned
    } else {
        value
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        Error::Validation(vec![FieldError { path, message: e.into_inner().to_string() }])
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportOptions {
    /// CSV text; exactly one of `content` and `path`.
    #[serde(default)]
    pub content: Option<String>,
    /// CSV file readable by the server.
    #[serde(default)]
    pub path: Option<String>,
    pub mapping: ImportMapping,
    /// Gazetteer lines `surface<TAB>KIND`.
    #[serde(default)]
    pub gazetteer: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupOptions {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoocJobOptions {
    #[serde(default = "default_unit")]
    pub unit: ContextUnit,
    #[serde(default = "default_measure")]
    pub measure: Measure,
    #[serde(default = "one")]
    pub min_count: u64,
    #[serde(default)]
    pub top_n: Option<usize>,
    /// Most frequent terms reported alongside the pairs.
    #[serde(default = "default_top_terms")]
    pub top_terms: usize,
}

fn default_unit() -> ContextUnit {
    ContextUnit::Sentence
}
fn default_measure() -> Measure {
    Measure::Dice
}
fn one() -> u64 {
    1
}
fn default_top_terms() -> usize {
    50
}

impl CoocJobOptions {
    pub fn core(&self) -> CoocOptions {
        CoocOptions { unit: self.unit, measure: self.measure, min_pair_count: self.min_count, top_n: self.top_n }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    /// Take labels and codebook from this coding session...
    #[serde(default)]
    pub session: Option<String>,
    /// ...or from an explicit document → code map.
    #[serde(default)]
    pub labels: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub codes: Option<Vec<String>>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    /// Metadata field holding the gold code...
    #[serde(default)]
    pub gold_field: Option<String>,
    /// ...or an explicit document → code map.
    #[serde(default)]
    pub gold: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub codes: Option<Vec<String>>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    pub budget: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_strategy() -> Strategy {
    Strategy::Entropy
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    CorpusCsv,
    Qdpx,
    LabelsCsv,
    TopicsCsv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::NotFound(format!("unknown export format {s:?}; use corpus-csv, qdpx, labels-csv or topics-csv")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportOptions {
    pub format: ExportFormat,
    #[serde(default)]
    pub session: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Seed of the deterministic QDPX guids.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub name: Option<String>,
}

/// Parsed, validated options of a job request.
#[derive(Debug, Clone)]
pub enum JobOptions {
    Import(ImportOptions),
    Dedup(DedupOptions),
    Cooc(CoocJobOptions),
    Lda(LdaSettings),
    Eval(EvalOptions),
    Simulate(SimulateOptions),
    Export(ExportOptions),
}

impl JobOptions {
    /// Checks a request before it is queued.
    pub fn validate(request: &JobRequest) -> Result<JobOptions> {
        request.params.validate().map_err(Error::from)?;
        let o = &request.options;
        let parsed = match request.kind {
            JobKind::Import => {
                let opts: ImportOptions = parse_at(o, "options")?;
                if opts.content.is_some() == opts.path.is_some() {
                    return Err(Error::field("options.content", "give exactly one of content and path"));
                }
                if let Some(g) = &opts.gazetteer {
                    Gazetteer::parse(g).map_err(|e| Error::field("options.gazetteer", e.to_string()))?;
                }
                JobOptions::Import(opts)
            }
            JobKind::Dedup => {
                let opts: DedupOptions = parse_at(o, "options")?;
                if !(opts.threshold > 0.0 && opts.threshold <= 1.0) {
                    return Err(Error::field("options.threshold", "must lie in (0, 1]"));
                }
                JobOptions::Dedup(opts)
            }
            JobKind::Cooc => {
                let opts: CoocJobOptions = parse_at(o, "options")?;
                if opts.min_count < 1 {
                    return Err(Error::field("options.min_count", "must be at least 1"));
                }
                JobOptions::Cooc(opts)
            }
            JobKind::Lda => {
                let opts: LdaSettings = parse_at(o, "options")?;
                opts.config()?;
                JobOptions::Lda(opts)
            }
            JobKind::Eval => {
                let opts: EvalOptions = parse_at(o, "options")?;
                if opts.session.is_some() == opts.labels.is_some() {
                    return Err(Error::field("options.session", "give exactly one of session and labels"));
                }
                if opts.folds < 2 {
                    return Err(Error::field("options.folds", "at least two folds are required"));
                }
                JobOptions::Eval(opts)
            }
            JobKind::Simulate => {
                let opts: SimulateOptions = parse_at(o, "options")?;
                if opts.gold_field.is_some() == opts.gold.is_some() {
                    return Err(Error::field("options.gold_field", "give exactly one of gold_field and gold"));
                }
                JobOptions::Simulate(opts)
            }
            JobKind::Export => {
                let opts: ExportOptions = parse_at(o, "options")?;
                match opts.format {
                    ExportFormat::LabelsCsv if opts.session.is_none() => {
                        return Err(Error::field("options.session", "labels export needs a session"))
                    }
                    ExportFormat::TopicsCsv if opts.model.is_none() => {
                        return Err(Error::field("options.model", "topics export needs a model"))
                    }
                    _ => {}
                }
                JobOptions::Export(opts)
            }
        };
        Ok(parsed)
    }
}

/// Everything a job needs, resolved when it starts.
pub struct JobInput<'a> {
    pub store: &'a Store,
    pub project: &'a str,
    pub job_id: &'a str,
    pub request: &'a JobRequest,
    pub options: JobOptions,
    /// Resolved snapshot and its documents; empty for IMPORT.
    pub snapshot: u32,
    pub corpus: Vec<Document>,
    pub session: Option<SessionRecord>,
    pub next_snapshot: u32,
}

/// What a finished job hands back to the project.
#[derive(Default)]
pub struct Outcome {
    pub snapshot: u32,
    pub params: AnalysisParams,
    pub files: Vec<(String, Vec<u8>)>,
    pub data: serde_json::Value,
    pub new_snapshot: Option<(Vec<Document>, ImportReport)>,
    pub model: Option<ModelMeta>,
    pub session_report: Option<(String, EvalReport)>,
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(value)?;
    b.push(b'\n');
    Ok(b)
}

/// Runs one job. `progress` receives fractions in [0, 1]; `cancelled` is
/// polled where the work can stop early.
pub fn execute(
    input: JobInput<'_>,
    progress: &dyn Fn(f64),
    cancelled: &dyn Fn() -> bool,
) -> Result<Outcome> {
    let params = analysis::effective_params(&input.corpus, &input.request.params, &input.request.blacklist_entities);
    let mut out = Outcome { snapshot: input.snapshot, params: params.clone(), ..Outcome::default() };
    match input.options {
        JobOptions::Import(opts) => {
            let bytes = match (&opts.content, &opts.path) {
                (Some(c), _) => c.clone().into_bytes(),
                (None, Some(p)) => std::fs::read(p).map_err(|e| Error::Unprocessable(format!("{p}: {e}")))?,
                (None, None) => unreachable!("validated"),
            };
            let (mut docs, report) = import_csv_reader(bytes.as_slice(), &opts.mapping)?;
            if let Some(g) = &opts.gazetteer {
                let gazetteer = Gazetteer::parse(g)?;
                docs = docs.into_iter().map(|d| tag_entities(d, &gazetteer)).collect();
            }
            out.snapshot = input.next_snapshot;
            out.data = serde_json::json!({ "snapshot": input.next_snapshot, "report": report });
            let mut csv = Vec::new();
            write_corpus_csv(&docs, &mut csv)?;
            out.files.push(("documents.csv".into(), csv));
            out.files.push(("report.json".into(), json_bytes(&report)?));
            out.new_snapshot = Some((docs, report));
        }
        JobOptions::Dedup(opts) => {
            let groups = deduplicate(&input.corpus, opts.threshold)?;
            out.files.push(("groups.json".into(), json_bytes(&groups)?));
            out.data = serde_json::json!({ "threshold": opts.threshold, "groups": groups });
        }
        JobOptions::Cooc(opts) => {
            let prepared = analysis::prepare(&input.corpus, &params)?;
            progress(0.3);
            let freqs = term_frequencies(&prepared.dtm, opts.top_terms);
            let result = analysis::cooc(&input.corpus, &prepared, &opts.core())?;
            out.files.push(("cooc.csv".into(), analysis::cooc_csv(&result)?));
            out.files.push(("frequencies.csv".into(), analysis::frequencies_csv(&freqs)));
            out.data = serde_json::json!({ "frequencies": freqs, "cooccurrence": result });
        }
        JobOptions::Lda(settings) => {
            let config = settings.config()?;
            let prepared = analysis::prepare(&input.corpus, &params)?;
            let total = config.iterations as f64;
            let model = analysis::fit(&prepared, &config, |p| {
                progress(p.sweep as f64 / total);
                if cancelled() {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
            save_model(&model, &TopicLabels::new(), input.store.model_dir(input.project, input.job_id))?;
            let top: Vec<_> = (0..model.n_topics())
                .map(|k| top_words(&model, k, 10.min(model.n_terms()), 1.0))
                .collect::<std::result::Result<_, _>>()?;
            out.files.push(("theta.csv".into(), analysis::theta_csv(&model)?));
            out.files.push(("phi.csv".into(), analysis::phi_csv(&model)?));
            out.data = serde_json::json!({
                "model": input.job_id,
                "config": config,
                "n_docs": model.n_docs(),
                "n_terms": model.n_terms(),
                "final_log_likelihood": model.log_likelihood_trace().last(),
                "warnings": model.warnings(),
                "top_words": top,
            });
            out.model = Some(ModelMeta {
                id: input.job_id.to_string(),
                snapshot: input.snapshot,
                preset: String::new(),
                k: config.k,
            });
        }
        JobOptions::Eval(opts) => {
            let (labels, codebook) = match (&opts.labels, &input.session) {
                (Some(l), _) => (l.clone(), analysis::codebook_for(opts.codes.as_deref(), l)?),
                (None, Some(s)) => (s.session.label_map(), s.session.codebook.clone()),
                (None, None) => return Err(Error::NotFound("session not found".into())),
            };
            let prepared = analysis::prepare(&input.corpus, &params)?;
            let report = evaluate(&prepared.dtm, &codebook, &labels, opts.folds, opts.seed)?;
            let mut csv = Vec::new();
            write_eval_csv(&report, &mut csv)?;
            out.files.push(("eval.json".into(), json_bytes(&report)?));
            out.files.push(("eval.csv".into(), csv));
            out.data = serde_json::to_value(&report)?;
            if let Some(s) = &opts.session {
                out.session_report = Some((s.clone(), report));
            }
        }
        JobOptions::Simulate(opts) => {
            let gold = match (&opts.gold, &opts.gold_field) {
                (Some(g), _) => g.clone(),
                (None, Some(f)) => analysis::gold_from_field(&input.corpus, f)?,
                (None, None) => unreachable!("validated"),
            };
            let codebook = analysis::codebook_for(opts.codes.as_deref(), &gold)?;
            let prepared = analysis::prepare(&input.corpus, &params)?;
            let curve = simulate_active_learning(&prepared.dtm, &codebook, &gold, opts.strategy, opts.budget, opts.seed)?;
            out.files.push(("curve.csv".into(), analysis::curve_csv(&curve)));
            out.data = serde_json::to_value(&curve)?;
        }
        JobOptions::Export(opts) => {
            let session = || {
                input.session.as_ref().ok_or_else(|| Error::NotFound("session not found".into()))
            };
            match opts.format {
                ExportFormat::CorpusCsv => {
                    let mut csv = Vec::new();
                    write_corpus_csv(&input.corpus, &mut csv)?;
                    out.files.push(("corpus.csv".into(), csv));
                }
                ExportFormat::LabelsCsv => {
                    let mut csv = Vec::new();
                    write_labels_csv(&session()?.session, &mut csv)?;
                    out.files.push(("labels.csv".into(), csv));
                }
                ExportFormat::Qdpx => {
                    let name = opts.name.clone().unwrap_or_else(|| input.project.to_string());
                    let project = match &input.session {
                        Some(s) => QdpxProject::from_coding(
                            name,
                            opts.seed,
                            &input.corpus,
                            &s.session.codebook,
                            &s.session.label_map(),
                        )?,
                        None => QdpxProject::from_coding(
                            name,
                            opts.seed,
                            &input.corpus,
                            &cm_core::classify::Codebook { codes: Vec::new() },
                            &BTreeMap::new(),
                        )?,
                    };
                    out.files.push(("project.qdpx".into(), qdpx_bytes(&project)?));
                }
                ExportFormat::TopicsCsv => {
                    let model_id = opts.model.as_deref().expect("validated");
                    let (model, _) = load_model(input.store.model_dir(input.project, model_id))
                        .map_err(|_| Error::NotFound(format!("model {model_id} not found")))?;
                    out.files.push(("theta.csv".into(), analysis::theta_csv(&model)?));
                    out.files.push(("phi.csv".into(), analysis::phi_csv(&model)?));
                }
            }
            out.data = serde_json::json!({
                "format": opts.format,
                "files": out.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            });
        }
    }
    progress(1.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(kind: JobKind, options: serde_json::Value) -> JobRequest {
        JobRequest {
            kind,
            snapshot: None,
            params: AnalysisParams::default(),
            blacklist_entities: Default::default(),
            options,
        }
    }

    fn paths(e: Error) -> Vec<String> {
        match e {
            Error::Validation(f) => f.into_iter().map(|f| f.path).collect(),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn min_above_max_names_both_fields() {
        let mut r = request(JobKind::Lda, serde_json::json!({"k": 2}));
        r.params.min_char = 9;
        r.params.max_char = 3;
        assert_eq!(paths(JobOptions::validate(&r).unwrap_err()), ["params.min_char", "params.max_char"]);
    }

    #[test]
    fn option_errors_carry_paths() {
        let r = request(JobKind::Lda, serde_json::json!({"k": "two"}));
        assert_eq!(paths(JobOptions::validate(&r).unwrap_err()), ["options.k"]);
        let r = request(JobKind::Cooc, serde_json::json!({"measure": "cosine"}));
        assert_eq!(paths(JobOptions::validate(&r).unwrap_err()), ["options.measure"]);
        let r = request(JobKind::Lda, serde_json::json!({"k": 2, "sweeps": 3}));
        assert_eq!(paths(JobOptions::validate(&r).unwrap_err()), ["options.sweeps"]);
        let r = request(JobKind::Simulate, serde_json::json!({}));
        assert_eq!(paths(JobOptions::validate(&r).unwrap_err()), ["options"]);
    }

    #[test]
    fn defaults_fill_in() {
        match JobOptions::validate(&request(JobKind::Cooc, serde_json::Value::Null)).unwrap() {
            JobOptions::Cooc(o) => assert_eq!((o.unit, o.measure, o.min_count), (ContextUnit::Sentence, Measure::Dice, 1)),
            _ => unreachable!(),
        }
        assert!("qdpx".parse::<ExportFormat>().is_ok());
        assert!("xlsx".parse::<ExportFormat>().is_err());
    }
}
