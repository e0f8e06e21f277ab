//! Output schemas: every template reply must deserialize into one of these shapes.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::spec::ZoneType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    Characters,
    Layout,
    RoomLabels,
    EventObjects,
    EventActions,
    EventGroups,
    EventOrder,
    Affordance,
    PlacementHints,
    PersonaSuggestions,
    Reply,
    PlannedActivity,
    Thought,
    Intent,
    ObjectAction,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct SchemaError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterOut {
    pub name: String,
    pub role: crate::spec::Role,
    #[serde(default)]
    pub age: Option<String>,
    #[serde(default)]
    pub personality: Option<String>,
    #[serde(default)]
    pub social_role: Option<String>,
    #[serde(default)]
    pub mood: Option<String>,
    #[serde(default)]
    pub language_style: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharactersOut {
    pub characters: Vec<CharacterOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutOut {
    pub layout_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomLabelsOut {
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeededObject {
    pub name: String,
    #[serde(default)]
    pub room: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventObjectsOut {
    pub objects: Vec<NeededObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOut {
    pub character: String,
    pub action: String,
    #[serde(default)]
    pub object: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventActionsOut {
    pub actions: Vec<ActionOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGroupsOut {
    /// 1-based action numbers.
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOrderOut {
    /// 0-based group indices in chronological order.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceOut {
    pub actions: Vec<String>,
    pub zone: ZoneType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearOut {
    pub object: String,
    pub anchor: String,
    pub max_distance: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlacementHintsOut {
    #[serde(default)]
    pub near: Vec<NearOut>,
    #[serde(default)]
    pub wall: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSuggestionsOut {
    pub suggestions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplyOut {
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedActivityOut {
    pub action: String,
    pub object_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtOut {
    pub thought: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Follow,
    SmallTalk,
    Derail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentOut {
    pub intent: Intent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectActionOut {
    pub action: String,
}

fn check<T: DeserializeOwned>(v: &Value) -> Result<T, SchemaError> {
    serde_json::from_value(v.clone()).map_err(|e| SchemaError(e.to_string()))
}

fn non_empty(s: &str, what: &str) -> Result<(), SchemaError> {
    if s.trim().is_empty() {
        Err(SchemaError(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

/// Pulls the JSON object out of a reply, tolerating code fences or chatter around it.
pub fn extract_json(raw: &str) -> Result<Value, SchemaError> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(a), Some(b)) if a < b => {
            serde_json::from_str(&trimmed[a..=b]).map_err(|e| SchemaError(format!("reply is not JSON: {e}")))
        }
        _ => Err(SchemaError("reply contains no JSON object".into())),
    }
}

impl SchemaId {
    /// Parses `raw` and checks it against this schema.
    pub fn validate(self, raw: &str) -> Result<Value, SchemaError> {
        let v = extract_json(raw)?;
        if !v.is_object() {
            return Err(SchemaError("reply must be a JSON object".into()));
        }
        match self {
            SchemaId::Characters => {
                let out: CharactersOut = check(&v)?;
                if out.characters.is_empty() {
                    return Err(SchemaError("characters is empty".into()));
                }
                for c in &out.characters {
                    non_empty(&c.name, "character name")?;
                }
            }
            SchemaId::Layout => non_empty(&check::<LayoutOut>(&v)?.layout_id, "layout_id")?,
            SchemaId::RoomLabels => {
                check::<RoomLabelsOut>(&v)?;
            }
            SchemaId::EventObjects => {
                for o in check::<EventObjectsOut>(&v)?.objects {
                    non_empty(&o.name, "object name")?;
                }
            }
            SchemaId::EventActions => {
                for a in check::<EventActionsOut>(&v)?.actions {
                    non_empty(&a.character, "character")?;
                    non_empty(&a.action, "action")?;
                }
            }
            SchemaId::EventGroups => {
                check::<EventGroupsOut>(&v)?;
            }
            SchemaId::EventOrder => {
                check::<EventOrderOut>(&v)?;
            }
            SchemaId::Affordance => {
                let out: AffordanceOut = check(&v)?;
                if out.actions.iter().all(|a| a.trim().is_empty()) {
                    return Err(SchemaError("actions is empty".into()));
                }
            }
            SchemaId::PlacementHints => {
                check::<PlacementHintsOut>(&v)?;
            }
            SchemaId::PersonaSuggestions => {
                check::<PersonaSuggestionsOut>(&v)?;
            }
            SchemaId::Reply => non_empty(&check::<ReplyOut>(&v)?.reply, "reply")?,
            SchemaId::PlannedActivity => {
                let out: PlannedActivityOut = check(&v)?;
                non_empty(&out.action, "action")?;
                non_empty(&out.object_id, "object_id")?;
            }
            SchemaId::Thought => non_empty(&check::<ThoughtOut>(&v)?.thought, "thought")?,
            SchemaId::Intent => {
                check::<IntentOut>(&v)?;
            }
            SchemaId::ObjectAction => non_empty(&check::<ObjectActionOut>(&v)?.action, "action")?,
        }
        Ok(v)
    }
}
