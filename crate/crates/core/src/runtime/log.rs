use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Init,
    Glow,
    Blocked,
    NotInZone,
    ActivityStart,
    ActivityPaused,
    ActivityResumed,
    ActivityEnd,
    PlanRequested,
    PlanResolved,
    Fallback,
    InnerVoice,
    Chat,
    EventCompleted,
    Ended,
    Warning,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub tick: u64,
    /// Character id, or "world".
    pub actor: String,
    pub kind: RecordKind,
    pub payload: Value,
}

/// Append-only. Ticks never decrease.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    records: Vec<Record>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tick: u64, actor: impl Into<String>, kind: RecordKind, payload: Value) {
        debug_assert!(self.records.last().is_none_or(|r| r.tick <= tick));
        let seq = self.records.len() as u64;
        self.records.push(Record { seq, tick, actor: actor.into(), kind, payload });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with `seq >= from`.
    pub fn from_seq(&self, from: u64) -> &[Record] {
        &self.records[(from as usize).min(self.records.len())..]
    }

    /// Records with `tick >= tick`.
    pub fn since_tick(&self, tick: u64) -> &[Record] {
        let i = self.records.partition_point(|r| r.tick < tick);
        &self.records[i..]
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// One JSON object per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Record>, _>>()?;
        Ok(Self { records })
    }

    pub fn from_records(records: Vec<Record>) -> Self {
        Self { records }
    }
}
