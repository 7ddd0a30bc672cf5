#![allow(dead_code)]

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use cm::server::store::Store;
use cm::server::{router, App};
use cm_core::corpus::Document;
use cm_core::interchange::write_corpus_csv;

pub struct Api {
    pub app: Arc<App>,
    pub router: Router,
    pub dir: std::path::PathBuf,
}

impl Api {
    pub fn open(dir: &std::path::Path, workers: usize) -> Api {
        let app = App::open(Store::open(dir).unwrap(), workers).unwrap();
        Api { router: router(app.clone()), app, dir: dir.to_path_buf() }
    }

    pub async fn raw(&self, method: Method, uri: &str, body: Option<Vec<u8>>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map(Body::from).unwrap_or_else(Body::empty))
            .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.raw(method, uri, body.map(|b| serde_json::to_vec(&b).unwrap())).await;
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    pub async fn project(&self, name: &str) -> String {
        let (s, v) = self.post("/projects", json!({ "name": name })).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    /// Polls a job until it is final; returns every distinct status seen.
    pub async fn wait(&self, project: &str, job: &str) -> (Value, Vec<String>) {
        let deadline = Instant::now() + Duration::from_secs(120);
        let mut seen: Vec<String> = Vec::new();
        loop {
            let (s, v) = self.get(&format!("/projects/{project}/jobs/{job}")).await;
            assert_eq!(s, StatusCode::OK, "{v}");
            let status = v["status"].as_str().unwrap().to_string();
            if seen.last() != Some(&status) {
                seen.push(status.clone());
            }
            if matches!(status.as_str(), "DONE" | "FAILED" | "CANCELLED") {
                return (v, seen);
            }
            assert!(Instant::now() < deadline, "job {job} did not finish");
            std::thread::sleep(Duration::from_millis(2));
        }
    }

    /// Imports documents through the corpus CSV layout and waits for it.
    pub async fn import(&self, project: &str, docs: &[Document]) -> Value {
        let (s, job) = self.post(&format!("/projects/{project}/import"), import_body(docs)).await;
        assert_eq!(s, StatusCode::ACCEPTED, "{job}");
        let (done, _) = self.wait(project, job["id"].as_str().unwrap()).await;
        assert_eq!(done["status"], "DONE", "{done}");
        done
    }

    pub async fn run(&self, project: &str, request: Value) -> Value {
        let (s, job) = self.post(&format!("/projects/{project}/jobs"), request).await;
        assert_eq!(s, StatusCode::ACCEPTED, "{job}");
        let (done, _) = self.wait(project, job["id"].as_str().unwrap()).await;
        assert_eq!(done["status"], "DONE", "{done}");
        done
    }

    pub async fn file(&self, project: &str, result: &str, name: &str) -> Vec<u8> {
        let (s, bytes) =
            self.raw(Method::GET, &format!("/projects/{project}/results/{result}/files/{name}"), None).await;
        assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
        bytes
    }
}

pub fn corpus_csv(docs: &[Document]) -> String {
    let mut buf = Vec::new();
    write_corpus_csv(docs, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// IMPORT options reading the corpus CSV layout.
pub fn import_body(docs: &[Document]) -> Value {
    let csv = corpus_csv(docs);
    let header = csv.lines().next().unwrap().to_string();
    let columns: serde_json::Map<String, Value> = header
        .split(',')
        .map(|c| {
            let target = if ["id", "title", "date", "body"].contains(&c) { c.to_string() } else { format!("metadata:{c}") };
            (c.to_string(), Value::String(target))
        })
        .collect();
    json!({ "content": csv, "mapping": { "columns": columns } })
}
