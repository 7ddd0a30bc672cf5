//! In-memory project state and the job scheduler.
//!
//! Jobs of one project start in submission order. A writer (IMPORT, LDA) waits
//! for the project to go idle and then runs alone; readers run side by side
//! while no writer is running. The first job that cannot start blocks the ones
//! behind it. A global worker limit bounds the number of running jobs.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::panic::AssertUnwindSafe;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use parking_lot::{Condvar, Mutex, RwLock};

use cm_core::classify::{Codebook, CodingSession, Strategy};
use cm_core::corpus::{Document, EntityKind};
use cm_core::pipeline::AnalysisParams;
use cm_core::topics::{load_model, save_model, TopicLabels, TopicModel};

use super::jobs::{execute, JobInput, JobOptions, Outcome};
use super::store::{
    JobKind, JobRecord, JobRequest, JobStatus, ModelMeta, ProjectMeta, ResultMeta, ResultRecord, SessionRecord,
    SnapshotMeta, Store,
};
use crate::analysis::{self, Prepared};
use crate::error::{Error, Result};

pub struct JobHandle {
    record: RwLock<JobRecord>,
    progress: AtomicU64,
    cancel: AtomicBool,
}

impl JobHandle {
    fn new(record: JobRecord) -> Arc<Self> {
        let progress = AtomicU64::new(record.progress.to_bits());
        Arc::new(JobHandle { record: RwLock::new(record), progress, cancel: AtomicBool::new(false) })
    }

    /// The record with live progress.
    pub fn snapshot(&self) -> JobRecord {
        let mut r = self.record.read().clone();
        r.progress = f64::from_bits(self.progress.load(Ordering::Relaxed));
        r
    }

    fn set_progress(&self, p: f64) {
        self.progress.store(p.clamp(0.0, 1.0).to_bits(), Ordering::Relaxed);
    }
}

#[derive(Default)]
struct Sched {
    queue: VecDeque<Arc<JobHandle>>,
    running: Vec<(String, JobKind)>,
}

/// A coding session plus its background retraining bookkeeping.
struct LiveSession {
    record: SessionRecord,
    /// Bumped by every label; a retrain installs its model only if no newer
    /// retrain has already done so.
    generation: u64,
    installed: u64,
}

struct Project {
    meta: Mutex<ProjectMeta>,
    jobs: Mutex<Vec<Arc<JobHandle>>>,
    sched: Mutex<Sched>,
    sessions: Mutex<BTreeMap<String, Arc<(Mutex<LiveSession>, Condvar)>>>,
    prepared: Mutex<HashMap<(u32, String), Arc<(Vec<Document>, Prepared)>>>,
    /// Serialises topic label edits on model directories.
    models: Mutex<()>,
}

pub struct App {
    store: Store,
    projects: RwLock<BTreeMap<String, Arc<Project>>>,
    workers: usize,
    running: AtomicUsize,
    create: Mutex<()>,
}

fn now() -> chrono::DateTime<Utc> {
    Utc::now()
}

/// What `POST /projects/{p}/sessions` accepts.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    /// Full codes, or plain ids via `codes`.
    #[serde(default)]
    pub codebook: Option<Codebook>,
    #[serde(default)]
    pub codes: Option<Vec<String>>,
    #[serde(default = "entropy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub snapshot: Option<u32>,
    #[serde(default)]
    pub params: AnalysisParams,
    #[serde(default)]
    pub blacklist_entities: std::collections::BTreeSet<EntityKind>,
    /// Documents to query; every document of the snapshot when absent.
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
}

fn entropy() -> Strategy {
    Strategy::Entropy
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub project: String,
    pub snapshot: u32,
    pub preset: String,
    pub strategy: Strategy,
    pub codebook: Codebook,
    pub labeled: usize,
    pub queued: usize,
    pub model_version: u64,
    pub stale: bool,
    pub labels: BTreeMap<String, String>,
    pub metrics_history: Vec<cm_core::classify::EvalReport>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct NextDocument {
    pub doc_id: String,
    pub model_version: u64,
    pub posterior: Option<Vec<f64>>,
    /// Labels were added after the model that chose this document and a
    /// retrain is pending.
    pub stale: bool,
    pub document: Document,
}

fn summary(r: &SessionRecord) -> SessionSummary {
    let s = &r.session;
    SessionSummary {
        id: r.id.clone(),
        project: r.project.clone(),
        snapshot: r.snapshot,
        preset: r.preset.clone(),
        strategy: s.strategy,
        codebook: s.codebook.clone(),
        labeled: s.labeled.len(),
        queued: s.queue.len(),
        model_version: s.model_version,
        stale: s.needs_retrain && s.can_train(),
        labels: s.label_map(),
        metrics_history: s.metrics_history.clone(),
    }
}

impl App {
    /// Opens the data directory, failing interrupted jobs and requeueing
    /// queued ones.
    pub fn open(store: Store, workers: usize) -> Result<Arc<App>> {
        let app = Arc::new(App {
            store,
            projects: RwLock::new(BTreeMap::new()),
            workers: workers.max(1),
            running: AtomicUsize::new(0),
            create: Mutex::new(()),
        });
        for id in app.store.project_ids()? {
            let meta = app.store.load_project(&id)?;
            let project = Arc::new(Project::new(meta));
            let mut records = app.store.load_jobs(&id)?;
            records.sort_by_key(|r| job_number(&r.id));
            for mut r in records {
                if r.status == JobStatus::Running {
                    r.status = JobStatus::Failed;
                    r.error = Some("interrupted".into());
                    r.finished = Some(now());
                    app.store.save_job(&r)?;
                }
                let queued = r.status == JobStatus::Queued;
                let h = JobHandle::new(r);
                project.jobs.lock().push(h.clone());
                if queued {
                    project.sched.lock().queue.push_back(h);
                }
            }
            for s in app.store.load_sessions(&id)? {
                project.insert_session(s);
            }
            app.projects.write().insert(id, project);
        }
        app.pump_all();
        Ok(app)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn project(&self, id: &str) -> Result<Arc<Project>> {
        self.projects.read().get(id).cloned().ok_or_else(|| Error::NotFound(format!("project {id} not found")))
    }

    pub fn create_project(&self, name: &str) -> Result<ProjectMeta> {
        if name.trim().is_empty() {
            return Err(Error::field("name", "must not be empty"));
        }
        let _guard = self.create.lock();
        let n = self.projects.read().len() + 1;
        let mut id = format!("p{n}");
        let mut bump = n;
        while self.projects.read().contains_key(&id) {
            bump += 1;
            id = format!("p{bump}");
        }
        let meta = ProjectMeta {
            id: id.clone(),
            name: name.to_string(),
            created: now(),
            snapshots: Vec::new(),
            presets: Vec::new(),
            models: Vec::new(),
            sessions: Vec::new(),
            results: Vec::new(),
        };
        self.store.save_project(&meta)?;
        self.projects.write().insert(id, Arc::new(Project::new(meta.clone())));
        Ok(meta)
    }

    pub fn list_projects(&self) -> Vec<ProjectMeta> {
        self.projects.read().values().map(|p| p.meta.lock().clone()).collect()
    }

    pub fn project_meta(&self, id: &str) -> Result<ProjectMeta> {
        Ok(self.project(id)?.meta.lock().clone())
    }

    pub fn document(&self, project: &str, id: &str, snapshot: Option<u32>) -> Result<Document> {
        let p = self.project(project)?;
        let v = p.meta.lock().resolve_snapshot(snapshot)?;
        self.store
            .load_snapshot(project, v)?
            .into_iter()
            .find(|d| d.id == id)
            .ok_or_else(|| Error::NotFound(format!("document {id} not found in snapshot {v}")))
    }

    // ---- jobs ----

    pub fn submit(self: &Arc<Self>, project: &str, request: JobRequest) -> Result<JobRecord> {
        let p = self.project(project)?;
        JobOptions::validate(&request)?;
        if let Some(v) = request.snapshot {
            p.meta.lock().resolve_snapshot(Some(v))?;
        }
        let handle = {
            let mut jobs = p.jobs.lock();
            let record = JobRecord {
                id: format!("j{}", jobs.len() + 1),
                project: project.to_string(),
                kind: request.kind,
                status: JobStatus::Queued,
                progress: 0.0,
                submitted: now(),
                started: None,
                finished: None,
                result: None,
                error: None,
                request,
            };
            self.store.save_job(&record)?;
            let h = JobHandle::new(record);
            jobs.push(h.clone());
            p.sched.lock().queue.push_back(h.clone());
            h
        };
        let record = handle.snapshot();
        self.pump(&p);
        Ok(record)
    }

    pub fn job(&self, project: &str, id: &str) -> Result<JobRecord> {
        Ok(self.project(project)?.job(id)?.snapshot())
    }

    pub fn jobs(&self, project: &str) -> Result<Vec<JobRecord>> {
        Ok(self.project(project)?.jobs.lock().iter().map(|h| h.snapshot()).collect())
    }

    /// A queued job is cancelled at once; a running job is asked to stop and
    /// becomes CANCELLED if it does so before finishing.
    pub fn cancel(self: &Arc<Self>, project: &str, id: &str) -> Result<JobRecord> {
        let p = self.project(project)?;
        let h = p.job(id)?;
        {
            let mut sched = p.sched.lock();
            let status = h.record.read().status;
            match status {
                JobStatus::Queued => {
                    sched.queue.retain(|q| !Arc::ptr_eq(q, &h));
                    let mut r = h.record.write();
                    r.status = JobStatus::Cancelled;
                    r.finished = Some(now());
                    self.store.save_job(&r)?;
                }
                JobStatus::Running => h.cancel.store(true, Ordering::SeqCst),
                s => return Err(Error::Conflict(format!("job {id} is already final ({s:?})"))),
            }
        }
        self.pump(&p);
        Ok(h.snapshot())
    }

    /// Blocks until the job is final or `timeout` passes.
    pub fn wait(&self, project: &str, id: &str, timeout: Duration) -> Result<JobRecord> {
        let p = self.project(project)?;
        let h = p.job(id)?;
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let r = h.snapshot();
            if r.status.is_final() || std::time::Instant::now() >= deadline {
                return Ok(r);
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    fn pump_all(self: &Arc<Self>) {
        let projects: Vec<_> = self.projects.read().values().cloned().collect();
        for p in projects {
            self.pump(&p);
        }
    }

    fn pump(self: &Arc<Self>, p: &Arc<Project>) {
        let mut sched = p.sched.lock();
        while let Some(head) = sched.queue.front() {
            let kind = head.record.read().kind;
            let free = if kind.is_writer() {
                sched.running.is_empty()
            } else {
                !sched.running.iter().any(|(_, k)| k.is_writer())
            };
            if !free {
                break;
            }
            let slots = self.running.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
                (n < self.workers).then_some(n + 1)
            });
            if slots.is_err() {
                break;
            }
            let h = sched.queue.pop_front().expect("head exists");
            {
                let mut r = h.record.write();
                r.status = JobStatus::Running;
                r.started = Some(now());
                if let Err(e) = self.store.save_job(&r) {
                    eprintln!("cm: saving job {}: {e}", r.id);
                }
                sched.running.push((r.id.clone(), kind));
            }
            let (app, project) = (self.clone(), p.clone());
            std::thread::spawn(move || app.run(project, h));
        }
    }

    fn run(self: Arc<Self>, p: Arc<Project>, h: Arc<JobHandle>) {
        let (id, request) = {
            let r = h.record.read();
            (r.id.clone(), r.request.clone())
        };
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| self.execute_job(&p, &h, &id, &request)))
            .unwrap_or_else(|_| Err(Error::Internal("job panicked".into())));
        let finished = outcome.and_then(|out| self.commit(&p, &id, request.kind, out));
        {
            let mut r = h.record.write();
            r.finished = Some(now());
            match finished {
                Ok(result) => {
                    r.status = JobStatus::Done;
                    r.result = Some(result);
                    h.set_progress(1.0);
                }
                Err(_) if h.cancel.load(Ordering::SeqCst) => r.status = JobStatus::Cancelled,
                Err(e) => {
                    r.status = JobStatus::Failed;
                    r.error = Some(e.to_string());
                }
            }
            r.progress = f64::from_bits(h.progress.load(Ordering::Relaxed));
            if let Err(e) = self.store.save_job(&r) {
                eprintln!("cm: saving job {}: {e}", r.id);
            }
        }
        p.sched.lock().running.retain(|(j, _)| *j != id);
        self.running.fetch_sub(1, Ordering::SeqCst);
        self.pump_all();
    }

    fn execute_job(&self, p: &Project, h: &JobHandle, id: &str, request: &JobRequest) -> Result<Outcome> {
        let options = JobOptions::validate(request)?;
        let meta = p.meta.lock().clone();
        let (snapshot, corpus) = if request.kind == JobKind::Import {
            (0, Vec::new())
        } else {
            let v = meta.resolve_snapshot(request.snapshot)?;
            (v, self.store.load_snapshot(&meta.id, v)?)
        };
        let session = match &options {
            JobOptions::Eval(o) => o.session.as_deref(),
            JobOptions::Export(o) => o.session.as_deref(),
            _ => None,
        };
        let session = match session {
            Some(s) => Some(p.session(s)?.0.lock().record.clone()),
            None => None,
        };
        let input = JobInput {
            store: &self.store,
            project: &meta.id,
            job_id: id,
            request,
            options,
            snapshot,
            corpus,
            session,
            next_snapshot: meta.latest_snapshot().unwrap_or(0) + 1,
        };
        execute(input, &|f| h.set_progress(f), &|| h.cancel.load(Ordering::SeqCst))
    }

    /// Persists a finished job's outcome and returns the result id.
    fn commit(&self, p: &Project, job: &str, kind: JobKind, out: Outcome) -> Result<String> {
        let mut meta = p.meta.lock();
        if let Some((docs, report)) = &out.new_snapshot {
            self.store.write_snapshot(&meta.id, out.snapshot, docs, report)?;
            meta.snapshots.push(SnapshotMeta {
                version: out.snapshot,
                created: now(),
                documents: docs.len(),
                job: Some(job.to_string()),
            });
        }
        let preset = self.store.save_preset(&meta.id, &out.params)?;
        if !meta.presets.contains(&preset) {
            meta.presets.push(preset.clone());
        }
        if let Some(mut m) = out.model {
            m.preset = preset.clone();
            meta.models.push(m);
        }
        if let Some((sid, report)) = out.session_report {
            if let Ok(s) = p.session(&sid) {
                let mut live = s.0.lock();
                live.record.session.metrics_history.push(report);
                self.store.save_session(&live.record)?;
            }
        }
        let record = ResultRecord {
            id: job.to_string(),
            kind,
            job: job.to_string(),
            snapshot: out.snapshot,
            preset: preset.clone(),
            created: now(),
            files: out.files.iter().map(|(n, _)| n.clone()).collect(),
            data: out.data,
        };
        self.store.save_result(&meta.id, &record, &out.files)?;
        meta.results.push(ResultMeta { id: record.id.clone(), kind, snapshot: out.snapshot, preset });
        self.store.save_project(&meta)?;
        Ok(record.id)
    }

    pub fn result(&self, project: &str, id: &str) -> Result<ResultRecord> {
        self.project(project)?;
        self.store.load_result(project, id)
    }

    pub fn result_file(&self, project: &str, id: &str, name: &str) -> Result<Vec<u8>> {
        self.project(project)?;
        self.store.result_file(project, id, name)
    }

    // ---- prepared corpora ----

    fn prepared(&self, p: &Project, snapshot: u32, preset: &str) -> Result<Arc<(Vec<Document>, Prepared)>> {
        let key = (snapshot, preset.to_string());
        if let Some(hit) = p.prepared.lock().get(&key) {
            return Ok(hit.clone());
        }
        let project = p.meta.lock().id.clone();
        let corpus = self.store.load_snapshot(&project, snapshot)?;
        let params = self.store.load_preset(&project, preset)?;
        let prepared = analysis::prepare(&corpus, &params)?;
        let entry = Arc::new((corpus, prepared));
        p.prepared.lock().insert(key, entry.clone());
        Ok(entry)
    }

    // ---- sessions ----

    pub fn create_session(&self, project: &str, req: SessionRequest) -> Result<SessionSummary> {
        let p = self.project(project)?;
        req.params.validate()?;
        let codebook = match (&req.codebook, &req.codes) {
            (Some(cb), None) => Codebook::new(cb.codes.clone())?,
            (None, Some(ids)) => Codebook::from_ids(ids.iter().map(String::as_str))?,
            _ => return Err(Error::field("codebook", "give exactly one of codebook and codes")),
        };
        if codebook.len() < 2 {
            return Err(Error::field("codebook", "at least two codes are required"));
        }
        let snapshot = p.meta.lock().resolve_snapshot(req.snapshot)?;
        let corpus = self.store.load_snapshot(project, snapshot)?;
        let params = analysis::effective_params(&corpus, &req.params, &req.blacklist_entities);
        let preset = self.store.save_preset(project, &params)?;
        let candidates = match req.candidates {
            Some(c) => {
                if let Some(missing) = c.iter().find(|id| !corpus.iter().any(|d| &d.id == *id)) {
                    return Err(Error::field("candidates", format!("unknown document {missing:?}")));
                }
                c
            }
            None => corpus.iter().map(|d| d.id.clone()).collect(),
        };
        let mut meta = p.meta.lock();
        let id = format!("{project}-s{}", meta.sessions.len() + 1);
        let record = SessionRecord {
            id: id.clone(),
            project: project.to_string(),
            snapshot,
            preset: preset.clone(),
            session: CodingSession::new(codebook, req.strategy, candidates),
        };
        self.store.save_session(&record)?;
        meta.sessions.push(id);
        if !meta.presets.contains(&preset) {
            meta.presets.push(preset);
        }
        self.store.save_project(&meta)?;
        let out = summary(&record);
        p.insert_session(record);
        Ok(out)
    }

    fn session(&self, id: &str) -> Result<(Arc<Project>, Arc<(Mutex<LiveSession>, Condvar)>)> {
        let project = id
            .rsplit_once("-s")
            .map(|(p, _)| p)
            .ok_or_else(|| Error::NotFound(format!("session {id} not found")))?;
        let p = self.project(project).map_err(|_| Error::NotFound(format!("session {id} not found")))?;
        let s = p.session(id)?;
        Ok((p, s))
    }

    pub fn session_summary(&self, id: &str) -> Result<SessionSummary> {
        let (_, s) = self.session(id)?;
        let live = s.0.lock();
        Ok(summary(&live.record))
    }

    /// Records a label and retrains in the background.
    pub fn add_label(
        self: &Arc<Self>,
        id: &str,
        doc: &str,
        code: &str,
        author: &str,
        overwrite: bool,
    ) -> Result<SessionSummary> {
        let (p, s) = self.session(id)?;
        let (snapshot, preset, generation, out) = {
            let mut live = s.0.lock();
            live.record.session.record_label(doc, code, author, overwrite)?;
            self.store.save_session(&live.record)?;
            live.generation += 1;
            (live.record.snapshot, live.record.preset.clone(), live.generation, summary(&live.record))
        };
        let app = self.clone();
        std::thread::spawn(move || {
            let retrained = (|| -> Result<Option<CodingSession>> {
                let prepared = app.prepared(&p, snapshot, &preset)?;
                let mut session = s.0.lock().record.session.clone();
                if !session.can_train() {
                    return Ok(None);
                }
                session.retrain(&prepared.1.dtm)?;
                Ok(Some(session))
            })();
            let mut live = s.0.lock();
            if let Ok(Some(trained)) = retrained {
                if generation > live.installed {
                    let model = trained.model.expect("retrained");
                    live.record.session.install_model(model);
                    live.record.session.needs_retrain = generation < live.generation;
                    live.installed = generation;
                    if let Err(e) = app.store.save_session(&live.record) {
                        eprintln!("cm: saving session: {e}");
                    }
                }
            } else if generation > live.installed {
                live.installed = generation;
            }
            s.1.notify_all();
        });
        Ok(out)
    }

    /// The next document to code. With `wait`, first lets pending retrains
    /// finish.
    pub fn next_document(&self, id: &str, wait: bool) -> Result<NextDocument> {
        let (p, s) = self.session(id)?;
        let (snapshot, preset) = {
            let mut live = s.0.lock();
            if wait {
                let deadline = std::time::Instant::now() + Duration::from_secs(60);
                while live.installed < live.generation {
                    if s.1.wait_until(&mut live, deadline).timed_out() {
                        break;
                    }
                }
            }
            (live.record.snapshot, live.record.preset.clone())
        };
        let prepared = self.prepared(&p, snapshot, &preset)?;
        let live = s.0.lock();
        let session = &live.record.session;
        let query = session.next(&prepared.1.dtm)?;
        let document = prepared
            .0
            .iter()
            .find(|d| d.id == query.doc_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("document {} not found", query.doc_id)))?;
        Ok(NextDocument {
            doc_id: query.doc_id,
            model_version: query.model_version,
            posterior: query.posterior,
            stale: session.needs_retrain && session.can_train(),
            document,
        })
    }

    // ---- topic models ----

    fn model(&self, project: &str, model: &str) -> Result<(Arc<Project>, ModelMeta, TopicModel, TopicLabels)> {
        let p = self.project(project)?;
        let meta = p
            .meta
            .lock()
            .models
            .iter()
            .find(|m| m.id == model)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("model {model} not found")))?;
        let (m, labels) = load_model(self.store.model_dir(project, model))?;
        Ok((p, meta, m, labels))
    }

    pub fn topics(&self, project: &str, model: &str, n: usize, lambda: f64) -> Result<serde_json::Value> {
        let (p, meta, m, labels) = self.model(project, model)?;
        let prepared = self.prepared(&p, meta.snapshot, &meta.preset)?;
        let n = n.min(m.n_terms());
        let coherence = cm_core::topics::coherence_umass(&m, &prepared.1.dtm, n.max(2).min(m.n_terms()))?;
        let topics: Vec<_> = (0..m.n_topics())
            .map(|k| {
                Ok(serde_json::json!({
                    "topic": k,
                    "label": labels.get(k),
                    "coherence": coherence.scores[k],
                    "top_words": cm_core::topics::top_words(&m, k, n, lambda)?,
                }))
            })
            .collect::<Result<_>>()?;
        Ok(serde_json::json!({
            "model": meta,
            "lambda": lambda,
            "topics": topics,
            "coherence_skipped": coherence.skipped,
        }))
    }

    pub fn label_topic(&self, project: &str, model: &str, topic: usize, label: &str, author: &str) -> Result<serde_json::Value> {
        let p = self.project(project)?;
        let _guard = p.models.lock();
        let (_, _, m, mut labels) = self.model(project, model)?;
        let entry = labels.label_topic(m.n_topics(), topic, label, author)?;
        save_model(&m, &labels, self.store.model_dir(project, model))?;
        Ok(serde_json::json!({ "label": entry, "history": labels.history_of(topic).collect::<Vec<_>>() }))
    }

    pub fn highlight(&self, project: &str, model: &str, topic: usize, doc: &str, min_weight: f64) -> Result<serde_json::Value> {
        let (p, meta, m, _) = self.model(project, model)?;
        let prepared = self.prepared(&p, meta.snapshot, &meta.preset)?;
        let spans = cm_core::topics::highlight(&m, &prepared.1.dtm, doc, topic, min_weight)?;
        let body = prepared.0.iter().find(|d| d.id == doc).map(|d| d.body.clone()).unwrap_or_default();
        Ok(serde_json::json!({ "doc_id": doc, "topic": topic, "body": body, "spans": spans }))
    }
}

fn job_number(id: &str) -> u64 {
    id.trim_start_matches('j').parse().unwrap_or(u64::MAX)
}

impl Project {
    fn new(meta: ProjectMeta) -> Self {
        Project {
            meta: Mutex::new(meta),
            jobs: Mutex::new(Vec::new()),
            sched: Mutex::new(Sched::default()),
            sessions: Mutex::new(BTreeMap::new()),
            prepared: Mutex::new(HashMap::new()),
            models: Mutex::new(()),
        }
    }

    fn job(&self, id: &str) -> Result<Arc<JobHandle>> {
        self.jobs
            .lock()
            .iter()
            .find(|h| h.record.read().id == id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("job {id} not found")))
    }

    fn insert_session(&self, record: SessionRecord) {
        let id = record.id.clone();
        let live = LiveSession { record, generation: 0, installed: 0 };
        self.sessions.lock().insert(id, Arc::new((Mutex::new(live), Condvar::new())));
    }

    fn session(&self, id: &str) -> Result<Arc<(Mutex<LiveSession>, Condvar)>> {
        self.sessions.lock().get(id).cloned().ok_or_else(|| Error::NotFound(format!("session {id} not found")))
    }
}
