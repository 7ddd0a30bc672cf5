//! The on-disk project tree.
//!
//! ```text
//! <data-dir>/projects/<p>/project.json
//!                        snapshots/<v>/documents.csv   corpus CSV export
//!                        snapshots/<v>/documents.json  full documents, entity tags included
//!                        snapshots/<v>/report.json     import report
//!                        presets/<preset>.json         AnalysisParams
//!                        jobs/<j>.json
//!                        results/<j>/result.json       plus the result's files
//!                        models/<j>/                   topic model directory
//!                        sessions/<s>.json
//! ```
//!
//! Every file is written atomically. Snapshots are never rewritten.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cm_core::classify::CodingSession;
use cm_core::corpus::{Document, EntityKind, ImportReport};
use cm_core::interchange::{atomic_write, write_corpus_csv};
use cm_core::pipeline::AnalysisParams;

use crate::analysis::preset_id;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobKind {
    Import,
    Dedup,
    Cooc,
    Lda,
    Eval,
    Simulate,
    Export,
}

impl JobKind {
    /// Writer jobs change project state other jobs read, so they run alone.
    pub fn is_writer(self) -> bool {
        matches!(self, JobKind::Import | JobKind::Lda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobStatus {
    pub fn can_become(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Queued, Running) | (Queued, Cancelled) | (Running, Done) | (Running, Failed) | (Running, Cancelled)
        )
    }

    pub fn is_final(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed | JobStatus::Cancelled)
    }
}

/// What a client submits to `POST /projects/{p}/jobs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRequest {
    pub kind: JobKind,
    /// Snapshot version to analyse; the latest when absent.
    #[serde(default)]
    pub snapshot: Option<u32>,
    #[serde(default)]
    pub params: AnalysisParams,
    #[serde(default)]
    pub blacklist_entities: BTreeSet<EntityKind>,
    /// Kind-specific options.
    #[serde(default)]
    pub options: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub project: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    pub submitted: DateTime<Utc>,
    pub started: Option<DateTime<Utc>>,
    pub finished: Option<DateTime<Utc>>,
    /// Result id once DONE.
    pub result: Option<String>,
    pub error: Option<String>,
    pub request: JobRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub version: u32,
    pub created: DateTime<Utc>,
    pub documents: usize,
    pub job: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub id: String,
    pub snapshot: u32,
    pub preset: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    pub id: String,
    pub kind: JobKind,
    pub snapshot: u32,
    pub preset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub id: String,
    pub name: String,
    pub created: DateTime<Utc>,
    pub snapshots: Vec<SnapshotMeta>,
    pub presets: Vec<String>,
    pub models: Vec<ModelMeta>,
    pub sessions: Vec<String>,
    pub results: Vec<ResultMeta>,
}

impl ProjectMeta {
    pub fn latest_snapshot(&self) -> Option<u32> {
        self.snapshots.last().map(|s| s.version)
    }

    pub fn resolve_snapshot(&self, requested: Option<u32>) -> Result<u32> {
        match requested {
            Some(v) if self.snapshots.iter().any(|s| s.version == v) => Ok(v),
            Some(v) => Err(Error::NotFound(format!("snapshot {v} not found in project {}", self.id))),
            None => self
                .latest_snapshot()
                .ok_or_else(|| Error::Conflict(format!("project {} has no corpus yet; import first", self.id))),
        }
    }
}

/// Stored outcome of a DONE job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub kind: JobKind,
    pub job: String,
    pub snapshot: u32,
    pub preset: String,
    pub created: DateTime<Utc>,
    /// Files downloadable under `/projects/{p}/results/{id}/files/{name}`.
    pub files: Vec<String>,
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub project: String,
    pub snapshot: u32,
    pub preset: String,
    pub session: CodingSession,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    atomic_write(path, &bytes)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Internal(format!("{}: {e}", path.display())))
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    out.sort();
    Ok(out)
}

/// File names served from result directories: no separators, no dot files.
pub fn safe_name(name: &str) -> bool {
    !name.is_empty() && !name.starts_with('.') && !name.contains(['/', '\\'])
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(root.join("projects"))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn project_dir(&self, project: &str) -> PathBuf {
        self.root.join("projects").join(project)
    }

    pub fn project_ids(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = std::fs::read_dir(self.root.join("projects"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("project.json").exists())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn save_project(&self, meta: &ProjectMeta) -> Result<()> {
        write_json(&self.project_dir(&meta.id).join("project.json"), meta)
    }

    pub fn load_project(&self, project: &str) -> Result<ProjectMeta> {
        read_json(&self.project_dir(project).join("project.json"))
    }

    fn snapshot_dir(&self, project: &str, version: u32) -> PathBuf {
        self.project_dir(project).join("snapshots").join(version.to_string())
    }

    pub fn write_snapshot(&self, project: &str, version: u32, docs: &[Document], report: &ImportReport) -> Result<()> {
        let dir = self.snapshot_dir(project, version);
        if dir.join("documents.json").exists() {
            return Err(Error::Conflict(format!("snapshot {version} already exists")));
        }
        std::fs::create_dir_all(&dir)?;
        let mut csv = Vec::new();
        write_corpus_csv(docs, &mut csv)?;
        atomic_write(dir.join("documents.csv"), &csv)?;
        write_json(&dir.join("report.json"), report)?;
        // written last: its presence marks a complete snapshot
        write_json(&dir.join("documents.json"), &docs)
    }

    pub fn load_snapshot(&self, project: &str, version: u32) -> Result<Vec<Document>> {
        read_json(&self.snapshot_dir(project, version).join("documents.json"))
    }

    /// Stores the parameter set under its content address and returns it.
    pub fn save_preset(&self, project: &str, params: &AnalysisParams) -> Result<String> {
        let id = preset_id(params);
        let path = self.project_dir(project).join("presets").join(format!("{id}.json"));
        if !path.exists() {
            write_json(&path, params)?;
        }
        Ok(id)
    }

    pub fn load_preset(&self, project: &str, id: &str) -> Result<AnalysisParams> {
        if !safe_name(id) {
            return Err(Error::NotFound(format!("preset {id}")));
        }
        read_json(&self.project_dir(project).join("presets").join(format!("{id}.json")))
    }

    pub fn save_job(&self, job: &JobRecord) -> Result<()> {
        write_json(&self.project_dir(&job.project).join("jobs").join(format!("{}.json", job.id)), job)
    }

    pub fn load_jobs(&self, project: &str) -> Result<Vec<JobRecord>> {
        json_files(&self.project_dir(project).join("jobs"))?.iter().map(|p| read_json(p)).collect()
    }

    pub fn result_dir(&self, project: &str, result: &str) -> PathBuf {
        self.project_dir(project).join("results").join(result)
    }

    pub fn save_result(&self, project: &str, record: &ResultRecord, files: &[(String, Vec<u8>)]) -> Result<()> {
        let dir = self.result_dir(project, &record.id);
        std::fs::create_dir_all(&dir)?;
        for (name, bytes) in files {
            atomic_write(dir.join(name), bytes)?;
        }
        write_json(&dir.join("result.json"), record)
    }

    pub fn load_result(&self, project: &str, result: &str) -> Result<ResultRecord> {
        let path = self.result_dir(project, result).join("result.json");
        if !safe_name(result) || !path.exists() {
            return Err(Error::NotFound(format!("result {result} not found")));
        }
        read_json(&path)
    }

    pub fn result_file(&self, project: &str, result: &str, name: &str) -> Result<Vec<u8>> {
        let record = self.load_result(project, result)?;
        if !safe_name(name) || !record.files.iter().any(|f| f == name) {
            return Err(Error::NotFound(format!("result {result} has no file {name}")));
        }
        Ok(std::fs::read(self.result_dir(project, result).join(name))?)
    }

    pub fn model_dir(&self, project: &str, model: &str) -> PathBuf {
        self.project_dir(project).join("models").join(model)
    }

    pub fn save_session(&self, record: &SessionRecord) -> Result<()> {
        write_json(
            &self.project_dir(&record.project).join("sessions").join(format!("{}.json", record.id)),
            record,
        )
    }

    pub fn load_sessions(&self, project: &str) -> Result<Vec<SessionRecord>> {
        json_files(&self.project_dir(project).join("sessions"))?.iter().map(|p| read_json(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions() {
        use JobStatus::*;
        assert!(Queued.can_become(Running));
        assert!(Queued.can_become(Cancelled));
        assert!(!Queued.can_become(Done));
        assert!(!Done.can_become(Running));
        assert!(!Cancelled.can_become(Running));
        assert!(Running.can_become(Failed));
    }

    #[test]
    fn snapshots_are_write_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let docs = vec![Document::new("a", "text")];
        store.write_snapshot("p1", 1, &docs, &ImportReport::default()).unwrap();
        assert_eq!(store.load_snapshot("p1", 1).unwrap(), docs);
        assert!(matches!(store.write_snapshot("p1", 1, &docs, &ImportReport::default()), Err(Error::Conflict(_))));
    }

    #[test]
    fn result_files_are_confined() {
        assert!(safe_name("theta.csv"));
        assert!(!safe_name("../project.json"));
        assert!(!safe_name(".hidden"));
    }
}
