use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::log::{EventLog, RecordKind};
use crate::planner::Origin;
use crate::spec::{CharacterId, VignetteSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    KeyEvent,
    /// Activities of characters assigned in the next key event that were not their authored one.
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub action: String,
    pub object: Option<String>,
    pub origin: Origin,
    /// Generated by the planner (only set when flagging is requested).
    pub generated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub kind: RowKind,
    /// Key event this row belongs to; `None` after the last one.
    pub event: Option<usize>,
    pub cells: BTreeMap<CharacterId, Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: CharacterId,
    pub name: String,
}

/// Character/activity table in temporal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

/// Builds the table from the activities that actually started. Each key-event row holds the
/// authored tuples plus whatever unassigned characters did while that event was pending;
/// a divergent row before it holds what assigned characters did instead.
pub fn export_activity_table(log: &EventLog, spec: &VignetteSpec, flag_generated: bool) -> ActivityTable {
    let columns: Vec<Column> = spec.characters.iter().map(|c| Column { id: c.id.clone(), name: c.name.clone() }).collect();
    let n = spec.key_events.len();
    let mut divergent: Vec<BTreeMap<CharacterId, Vec<Cell>>> = vec![BTreeMap::new(); n + 1];
    let mut during: Vec<BTreeMap<CharacterId, Vec<Cell>>> = vec![BTreeMap::new(); n + 1];
    for r in log.of_kind(RecordKind::ActivityStart) {
        let p = &r.payload;
        let origin: Origin = serde_json::from_value(p["origin"].clone()).unwrap_or(Origin::Fallback);
        if origin == Origin::Authored {
            continue;
        }
        let window = p["window"].as_u64().map(|w| w as usize).unwrap_or(n).min(n);
        let who = CharacterId::new(r.actor.clone());
        let cell = Cell {
            action: p["action"].as_str().unwrap_or_default().to_string(),
            object: p["object"].as_str().map(str::to_string),
            origin,
            generated: flag_generated && origin == Origin::Planner,
        };
        let assigned = window < n && spec.key_events[window].activity_of(&who).is_some();
        let target = if assigned { &mut divergent[window] } else { &mut during[window] };
        target.entry(who).or_default().push(cell);
    }
    let mut rows = Vec::new();
    for (k, ev) in spec.key_events.iter().enumerate() {
        if !divergent[k].is_empty() {
            rows.push(Row { label: format!("E{} divergent", k + 1), kind: RowKind::Divergent, event: Some(k), cells: std::mem::take(&mut divergent[k]) });
        }
        let mut cells = std::mem::take(&mut during[k]);
        for t in &ev.activities {
            let cell = Cell {
                action: t.action.clone(),
                object: t.object_id.as_ref().map(|o| o.as_str().to_string()),
                origin: Origin::Authored,
                generated: false,
            };
            cells.insert(t.character_id.clone(), vec![cell]);
        }
        rows.push(Row { label: format!("E{}", k + 1), kind: RowKind::KeyEvent, event: Some(k), cells });
    }
    if !during[n].is_empty() {
        rows.push(Row { label: "after".into(), kind: RowKind::Divergent, event: None, cells: std::mem::take(&mut during[n]) });
    }
    ActivityTable { columns, rows }
}

impl Cell {
    /// "(action, object)", with a trailing `*` on generated cells.
    pub fn text(&self) -> String {
        let star = if self.generated { "*" } else { "" };
        match &self.object {
            Some(o) => format!("({}, {o}){star}", self.action),
            None => format!("({}){star}", self.action),
        }
    }
}

impl ActivityTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// One row per table row; multiple activities in a cell are joined with " / ".
    /// Generated cells end with `*`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            for c in &self.columns {
                let cells = r.cells.get(&c.id).map(|v| v.iter().map(Cell::text).collect::<Vec<_>>().join(" / ")).unwrap_or_default();
                rec.push(cells);
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Number of flagged cells.
    pub fn generated_count(&self) -> usize {
        self.rows.iter().flat_map(|r| r.cells.values()).flatten().filter(|c| c.generated).count()
    }
}
