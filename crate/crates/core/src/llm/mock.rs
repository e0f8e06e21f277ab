//! Deterministic scripted provider.
//!
//! A script maps `(template, variables)` to a canned reply. Entries are looked
//! up first by exact key (see [`mock_key`]), then by `match` rules in file
//! order, where every listed variable must contain the given substring.
//! Anything else gets a template-specific safe default derived from the
//! variables, flagged as a fallback and logged.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::gateway::{Provider, ProviderCall, ProviderReply, TransportError};
use super::template::TemplateId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    Timeout,
    Transport,
}

impl Fault {
    fn error(self) -> TransportError {
        match self {
            Fault::Timeout => TransportError::Timeout,
            Fault::Transport => TransportError::Failed("injected transport fault".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub template: TemplateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub matcher: Option<BTreeMap<String, String>>,
    /// A string is returned verbatim; any other JSON value is returned serialized.
    #[serde(default)]
    pub response: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub default_latency_ms: u64,
    #[serde(default)]
    pub template_latency_ms: BTreeMap<TemplateId, u64>,
    /// Case-insensitive substrings that moderation flags.
    #[serde(default)]
    pub denylist: Vec<String>,
    #[serde(default)]
    pub moderation_fault: Option<Fault>,
    #[serde(default)]
    pub entries: Vec<MockEntry>,
}

fn default_version() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading mock script {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing mock script: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("mock script entry {index}: {message}")]
    Entry { index: usize, message: String },
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let script: MockScript = serde_json::from_str(text)?;
        script.check()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScriptError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<(), ScriptError> {
        for (index, e) in self.entries.iter().enumerate() {
            let bad = |message: &str| Err(ScriptError::Entry { index, message: message.to_string() });
            match (&e.key, &e.matcher) {
                (Some(_), Some(_)) => return bad("set either key or match, not both"),
                (None, None) => return bad("needs a key or a match rule"),
                (Some(k), None) if k.len() != 32 || !k.chars().all(|c| c.is_ascii_hexdigit()) => {
                    return bad("key must be 32 hex characters")
                }
                (None, Some(m)) if m.is_empty() => return bad("match rule is empty"),
                _ => {}
            }
            if e.fault.is_none() && e.response.is_null() {
                return bad("needs a response or a fault");
            }
        }
        Ok(())
    }
}

/// Stable key for a request: SHA-256 over the canonical JSON of
/// `{"template": ID, "variables": {sorted}}`, first 16 bytes in hex.
pub fn mock_key(template: TemplateId, variables: &BTreeMap<String, String>) -> String {
    let doc = json!({ "template": template.as_str(), "variables": variables });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    hex::encode(&digest[..16])
}

/// A request the mock has served, for later inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordedCall {
    pub template_id: TemplateId,
    pub key: String,
    pub variables: BTreeMap<String, String>,
    pub prompt: String,
    pub fallback: bool,
}

#[derive(Debug, Default)]
struct MockState {
    calls: Vec<RecordedCall>,
    moderation_fault: Option<Fault>,
}

#[derive(Debug)]
pub struct ScriptedMock {
    script: MockScript,
    realtime: bool,
    state: Mutex<MockState>,
}

impl ScriptedMock {
    pub fn new(script: MockScript) -> Self {
        let moderation_fault = script.moderation_fault;
        Self { script, realtime: false, state: Mutex::new(MockState { calls: Vec::new(), moderation_fault }) }
    }

    /// A mock with no entries; every request gets its template default.
    pub fn empty() -> Self {
        Self::new(MockScript::default())
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        Ok(Self::new(MockScript::load(path)?))
    }

    /// Actually sleep for each reply's latency instead of only reporting it.
    pub fn realtime(mut self, on: bool) -> Self {
        self.realtime = on;
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn set_moderation_fault(&self, fault: Option<Fault>) {
        self.state.lock().unwrap().moderation_fault = fault;
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn seen_templates(&self) -> BTreeSet<TemplateId> {
        self.state.lock().unwrap().calls.iter().map(|c| c.template_id).collect()
    }

    /// Requests that fell through to a default.
    pub fn misses(&self) -> Vec<RecordedCall> {
        self.state.lock().unwrap().calls.iter().filter(|c| c.fallback).cloned().collect()
    }

    fn lookup(&self, template: TemplateId, key: &str, vars: &BTreeMap<String, String>) -> Option<&MockEntry> {
        let by_key = self.script.entries.iter().find(|e| e.template == template && e.key.as_deref() == Some(key));
        by_key.or_else(|| {
            self.script.entries.iter().find(|e| {
                e.template == template
                    && e.matcher.as_ref().is_some_and(|m| {
                        m.iter().all(|(k, want)| vars.get(k).is_some_and(|have| have.contains(want.as_str())))
                    })
            })
        })
    }

    fn latency_for(&self, template: TemplateId, entry: Option<&MockEntry>) -> u64 {
        entry
            .and_then(|e| e.latency_ms)
            .or_else(|| self.script.template_latency_ms.get(&template).copied())
            .unwrap_or(self.script.default_latency_ms)
    }
}

impl Provider for ScriptedMock {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, call: &ProviderCall<'_>) -> Result<ProviderReply, TransportError> {
        let key = mock_key(call.template_id, call.variables);
        let entry = self.lookup(call.template_id, &key, call.variables);
        let latency_ms = self.latency_for(call.template_id, entry);
        let fallback = entry.is_none();
        if fallback {
            tracing::info!(template = %call.template_id, key = %key, "mock: no scripted entry, using default");
        }
        self.state.lock().unwrap().calls.push(RecordedCall {
            template_id: call.template_id,
            key: key.clone(),
            variables: call.variables.clone(),
            prompt: call.prompt.clone(),
            fallback,
        });
        if self.realtime && latency_ms > 0 {
            std::thread::sleep(Duration::from_millis(latency_ms));
        }
        if let Some(fault) = entry.and_then(|e| e.fault) {
            return Err(fault.error());
        }
        let text = match entry {
            Some(e) => match &e.response {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            },
            None => default_response(call.template_id, call.variables, &key),
        };
        Ok(ProviderReply { text, latency_ms, fallback })
    }

    fn moderate(&self, text: &str) -> Result<bool, TransportError> {
        if let Some(fault) = self.state.lock().unwrap().moderation_fault {
            return Err(fault.error());
        }
        let lower = text.to_lowercase();
        Ok(self.script.denylist.iter().any(|tok| !tok.is_empty() && lower.contains(&tok.to_lowercase())))
    }
}

fn var<'a>(vars: &'a BTreeMap<String, String>, name: &str) -> &'a str {
    vars.get(name).map(String::as_str).unwrap_or_default()
}

/// Schema-valid replies for unscripted requests. Derived from the variables, so deterministic.
pub fn default_response(template: TemplateId, vars: &BTreeMap<String, String>, key: &str) -> String {
    let reply = match template {
        TemplateId::ExtractCharacters => json!({ "characters": [{ "name": "me", "role": "PC" }] }),
        TemplateId::SelectLayout => json!({ "layout_id": "residential" }),
        TemplateId::LabelRooms => json!({ "labels": {} }),
        TemplateId::ExtractEvents => match var(vars, "phase") {
            "objects" => json!({ "objects": [] }),
            "group" => {
                let n: usize = var(vars, "action_count").parse().unwrap_or(0);
                json!({ "groups": (1..=n).map(|i| vec![i]).collect::<Vec<_>>() })
            }
            "order" => {
                let n: usize = var(vars, "group_count").parse().unwrap_or(0);
                json!({ "order": (0..n).collect::<Vec<_>>() })
            }
            _ => json!({ "actions": [] }),
        },
        TemplateId::Affordance => json!({ "actions": ["inspect"], "zone": "around" }),
        TemplateId::PlaceReasoning => json!({ "near": [], "wall": [] }),
        TemplateId::PersonaSuggest => json!({ "suggestions": {} }),
        TemplateId::CharChat => json!({ "reply": "Hi! Nice to see you." }),
        TemplateId::PlanActivity => default_plan(vars, key),
        TemplateId::InnerVoice => json!({ "thought": format!("Maybe I should be {} now.", var(vars, "action")) }),
        TemplateId::GuideReply => {
            json!({ "reply": format!("Let's not skip it. {} is next, let's do it together.", var(vars, "next_event")) })
        }
        TemplateId::DivergenceIntent => json!({ "intent": "small_talk" }),
        TemplateId::BlActivity => {
            let first = var(vars, "actions").split(';').next().unwrap_or("inspect").trim().to_string();
            json!({ "action": if first.is_empty() { "inspect".to_string() } else { first } })
        }
    };
    reply.to_string()
}

/// Picks an object from the `objects` variable (lines `id: name: a1; a2`) by key hash.
fn default_plan(vars: &BTreeMap<String, String>, key: &str) -> Value {
    let options: Vec<(&str, &str)> = var(vars, "objects")
        .lines()
        .filter_map(|line| {
            let mut parts = line.splitn(3, ':');
            let id = parts.next()?.trim();
            let _name = parts.next()?;
            let action = parts.next()?.split(';').next()?.trim();
            (!id.is_empty() && !action.is_empty()).then_some((id, action))
        })
        .collect();
    if options.is_empty() {
        return json!({ "action": "idle", "object_id": "none" });
    }
    let pick = u64::from_str_radix(&key[..8], 16).unwrap_or(0) as usize % options.len();
    let (id, action) = options[pick];
    json!({ "action": action, "object_id": id })
}
