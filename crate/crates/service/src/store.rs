//! File-backed persistence: one JSON document per vignette, one append-only NDJSON log per session.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use vignette_core::env::Unplaceable;
use vignette_core::extract::{ExtractionFlag, ExtractionSession, Stage};
use vignette_core::planner::PlannerMode;
use vignette_core::runtime::Record;
use vignette_core::spec::VignetteSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredVignette {
    pub id: String,
    pub extraction_stage: Stage,
    pub spec: VignetteSpec,
    #[serde(default)]
    pub flags: Vec<ExtractionFlag>,
    #[serde(default)]
    pub unplaceable: Vec<Unplaceable>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl StoredVignette {
    pub fn new(id: String, session: ExtractionSession) -> Self {
        let now = Utc::now();
        Self {
            id,
            extraction_stage: session.stage,
            spec: session.draft,
            flags: session.flags,
            unplaceable: session.unplaceable,
            created_at: now,
            updated_at: now,
        }
    }

    pub fn session(&self) -> ExtractionSession {
        ExtractionSession {
            stage: self.extraction_stage,
            draft: self.spec.clone(),
            flags: self.flags.clone(),
            unplaceable: self.unplaceable.clone(),
        }
    }

    pub fn apply(&mut self, session: ExtractionSession) {
        self.extraction_stage = session.stage;
        self.spec = session.draft;
        self.flags = session.flags;
        self.unplaceable = session.unplaceable;
        self.updated_at = Utc::now();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub vignette_id: String,
    pub mode: PlannerMode,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("vignettes"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn vignette_path(&self, id: &str) -> PathBuf {
        self.root.join("vignettes").join(format!("{id}.json"))
    }

    pub fn session_log_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.ndjson"))
    }

    /// Every stored vignette. Unreadable documents are skipped with a warning.
    pub fn load_vignettes(&self) -> io::Result<Vec<StoredVignette>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("vignettes"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            match fs::read(&path).map_err(|e| e.to_string()).and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string())) {
                Ok(v) => out.push(v),
                Err(e) => tracing::warn!(path = %path.display(), "skipping vignette: {e}"),
            }
        }
        out.sort_by(|a: &StoredVignette, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }

    /// Write to a temp file then rename, so a crash never leaves half a document.
    pub fn save_vignette(&self, v: &StoredVignette) -> io::Result<()> {
        let path = self.vignette_path(&v.id);
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec_pretty(v).map_err(io::Error::other)?;
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }

    pub fn save_session_meta(&self, meta: &SessionMeta) -> io::Result<()> {
        let path = self.root.join("sessions").join(format!("{}.meta.json", meta.id));
        fs::write(path, serde_json::to_vec_pretty(meta).map_err(io::Error::other)?)
    }

    pub fn append_records(&self, session_id: &str, records: &[Record]) -> io::Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).map_err(io::Error::other)?);
            buf.push('\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.session_log_path(session_id))?;
        f.write_all(buf.as_bytes())
    }
}
