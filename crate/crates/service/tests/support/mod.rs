#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;
use vignette_core::extract::{ExtractionSession, Stage};
use vignette_core::spec::{decode_spec, VignetteSpec};
use vignette_service::{router, AppState, ServiceConfig, Store, StoredVignette};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn kelly_story() -> String {
    std::fs::read_to_string(fixtures().join("kelly/story.txt")).unwrap().trim().to_string()
}

pub fn kelly_spec() -> VignetteSpec {
    decode_spec(&std::fs::read(fixtures().join("kelly/kelly.vignette.json")).unwrap()).unwrap()
}

pub fn kelly_mock() -> PathBuf {
    fixtures().join("kelly/mock.json")
}

/// A service over a temp store, driven in-process.
pub struct Api {
    pub state: Arc<AppState>,
    app: Router,
    pub dir: PathBuf,
}

impl Api {
    pub fn open(dir: &Path, tick_ms: u64, mock: &Path) -> Self {
        let config = ServiceConfig { port: 0, store_dir: dir.to_path_buf(), tick_ms, mock_script: Some(mock.to_path_buf()) };
        let state = AppState::open(config).expect("service starts");
        Self { app: router(state.clone()), state, dir: dir.to_path_buf() }
    }

    pub async fn raw(&self, method: Method, path: &str, content_type: Option<&str>, body: Body) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(ct) = content_type {
            req = req.header("content-type", ct);
        }
        let res = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into())) };
        (status, value)
    }

    pub async fn call(&self, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        match body {
            Some(b) => self.raw(method, path, Some("application/json"), Body::from(b.to_string())).await,
            None => self.raw(method, path, None, Body::empty()).await,
        }
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(body)).await
    }
}

/// A temp store holding the finished Kelly vignette under id `kelly`.
pub fn store_with_kelly() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let session = ExtractionSession { stage: Stage::Complete, draft: kelly_spec(), flags: Vec::new(), unplaceable: Vec::new() };
    store.save_vignette(&StoredVignette::new("kelly".into(), session)).unwrap();
    dir
}
