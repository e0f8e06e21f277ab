use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{mentions_any, ExtractionFlag, Extractor, FlagCode};
use crate::catalog::normalize_name;
use crate::env::RequiredObject;
use crate::llm::{EventActionsOut, EventGroupsOut, EventObjectsOut, EventOrderOut, PromptRequest, SchemaId, TemplateId};
use crate::spec::{ActivityTuple, Character, CharacterId, Environment, KeyEvent, ObjectId, ObjectKind};

/// Key events plus the notes the author should look at.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventsDraft {
    pub key_events: Vec<KeyEvent>,
    pub flags: Vec<ExtractionFlag>,
}

pub fn character_lines(characters: &[Character]) -> String {
    characters
        .iter()
        .map(|c| format!("{}: {} ({})", c.id, c.name, if c.is_pc() { "PC" } else { "NPC" }))
        .collect::<Vec<_>>()
        .join("\n")
}

/// `id: name: action; action` per object, the format planning prompts use too.
pub fn object_lines<'a>(objects: impl IntoIterator<Item = &'a crate::spec::ObjectInstance>) -> String {
    objects.into_iter().map(|o| format!("{}: {}: {}", o.id, o.name, o.actions.join("; "))).collect::<Vec<_>>().join("\n")
}

/// Resolves a character mention: id, name, or a first-person word for the PC.
pub fn match_character(characters: &[Character], mention: &str) -> Option<CharacterId> {
    let m = mention.trim();
    characters
        .iter()
        .find(|c| c.id.as_str().eq_ignore_ascii_case(m) || c.name.eq_ignore_ascii_case(m))
        .or_else(|| {
            mentions_any(m, &["i", "me", "myself", "pc", "narrator"])
                .then(|| characters.iter().find(|c| c.is_pc()))
                .flatten()
        })
        .map(|c| c.id.clone())
}

/// Resolves an object mention: id, display name, then any object of the same catalog asset.
pub fn match_object(extractor: &Extractor, env: &Environment, mention: &str) -> Option<ObjectId> {
    let m = mention.trim();
    if m.is_empty() {
        return None;
    }
    if let Some(o) = env.objects.iter().find(|o| o.id.as_str() == m) {
        return Some(o.id.clone());
    }
    let n = normalize_name(m);
    if let Some(o) = env.objects.iter().find(|o| normalize_name(&o.name) == n) {
        return Some(o.id.clone());
    }
    let asset = extractor.catalog().find_asset(m)?;
    env.objects.iter().find(|o| o.asset_id == asset.id).map(|o| o.id.clone())
}

/// Every action index 1..=n exactly once, groups of consecutive numbers, one action per character.
fn check_grouping(groups: &[Vec<usize>], n: usize, actions: &[ActivityTuple]) -> Result<Vec<Vec<usize>>, String> {
    let mut seen = BTreeSet::new();
    let mut sorted: Vec<Vec<usize>> = Vec::new();
    for g in groups {
        if g.is_empty() {
            return Err("empty group".into());
        }
        let mut g = g.clone();
        g.sort_unstable();
        for w in g.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(format!("group {g:?} merges actions that are not adjacent"));
            }
        }
        let mut chars = BTreeSet::new();
        for i in &g {
            if *i == 0 || *i > n {
                return Err(format!("action {i} does not exist"));
            }
            if !seen.insert(*i) {
                return Err(format!("action {i} appears twice"));
            }
            if !chars.insert(&actions[i - 1].character_id) {
                return Err(format!("group {g:?} gives one character two actions"));
            }
        }
        sorted.push(g);
    }
    if seen.len() != n {
        return Err("some actions are in no group".into());
    }
    sorted.sort();
    Ok(sorted)
}

impl Extractor {
    /// Objects the story's actions need, each with the room it belongs in.
    pub fn extract_event_objects(&self, story: &str, characters: &[Character], env: &Environment) -> Vec<RequiredObject> {
        let rooms = env.rooms.iter().map(|r| r.label.as_str()).collect::<Vec<_>>().join(", ");
        let req = self.events_request("objects", story, characters, &format!("(none placed yet; rooms: {rooms})"), "", "")
            .with_schema(SchemaId::EventObjects);
        match self.gateway.complete(&req).map(|r| r.value::<EventObjectsOut>()) {
            Ok(Ok(out)) => out
                .objects
                .into_iter()
                .map(|o| RequiredObject::new(o.name.trim(), o.room.as_deref().map(str::trim), ObjectKind::NecessaryEvent))
                .collect(),
            other => {
                tracing::warn!(result = ?other.err(), "event object pre-pass failed");
                Vec::new()
            }
        }
    }

    fn events_request(&self, phase: &str, story: &str, characters: &[Character], objects: &str, actions: &str, groups: &str) -> PromptRequest {
        let count = |s: &str| if s.is_empty() { String::new() } else { s.lines().count().to_string() };
        PromptRequest::new(
            TemplateId::ExtractEvents,
            [
                ("phase", phase.to_string()),
                ("story", story.to_string()),
                ("characters", character_lines(characters)),
                ("objects", objects.to_string()),
                ("action_count", count(actions)),
                ("actions", if actions.is_empty() { "-".into() } else { actions.to_string() }),
                ("group_count", count(groups)),
                ("groups", if groups.is_empty() { "-".into() } else { groups.to_string() }),
            ],
        )
        .expect("template variables")
    }

    /// Three passes: per-character actions matched to objects, simultaneity grouping, chronological order.
    pub fn extract_events(&self, story: &str, characters: &[Character], env: &Environment) -> EventsDraft {
        let mut draft = EventsDraft::default();
        let objects = object_lines(&env.objects);

        // 1. actions
        let req = self.events_request("actions", story, characters, &objects, "", "").with_schema(SchemaId::EventActions);
        let out: EventActionsOut = match self.gateway.complete(&req).map(|r| r.value()) {
            Ok(Ok(v)) => v,
            other => {
                let why = match other {
                    Ok(Err(e)) => e.to_string(),
                    Err(e) => e.to_string(),
                    Ok(Ok(_)) => unreachable!(),
                };
                draft.flags.push(ExtractionFlag::new(FlagCode::ExtractionFailed, "key_events", format!("action listing failed: {why}")));
                return draft;
            }
        };
        let mut actions: Vec<ActivityTuple> = Vec::new();
        for a in out.actions {
            let Some(character_id) = match_character(characters, &a.character) else {
                draft.flags.push(ExtractionFlag::new(
                    FlagCode::NeedsReview,
                    "key_events",
                    format!("\"{}\" by unknown character \"{}\" was dropped", a.action.trim(), a.character.trim()),
                ));
                continue;
            };
            let object_id = a.object.as_deref().and_then(|o| match_object(self, env, o));
            actions.push(ActivityTuple { character_id, action: a.action.trim().to_string(), object_id });
        }
        if actions.is_empty() {
            return draft;
        }
        let numbered = actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let obj = a.object_id.as_ref().map(|o| o.as_str()).unwrap_or("no object");
                format!("{}. {}: {} ({obj})", i + 1, a.character_id, a.action)
            })
            .collect::<Vec<_>>()
            .join("\n");

        // 2. grouping
        let req = self.events_request("group", story, characters, &objects, &numbered, "").with_schema(SchemaId::EventGroups);
        let proposed = match self.gateway.complete(&req).map(|r| r.value::<EventGroupsOut>()) {
            Ok(Ok(v)) => check_grouping(&v.groups, actions.len(), &actions),
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let groups = proposed.unwrap_or_else(|why| {
            draft.flags.push(ExtractionFlag::new(
                FlagCode::GroupingRejected,
                "key_events",
                format!("grouping rejected ({why}); each action is its own event"),
            ));
            (1..=actions.len()).map(|i| vec![i]).collect()
        });

        // 3. order
        let listing = groups
            .iter()
            .enumerate()
            .map(|(gi, g)| {
                let parts: Vec<String> = g.iter().map(|i| format!("{} {}", actions[i - 1].character_id, actions[i - 1].action)).collect();
                format!("{gi}: {}", parts.join("; "))
            })
            .collect::<Vec<_>>()
            .join("\n");
        let req = self.events_request("order", story, characters, &objects, &numbered, &listing).with_schema(SchemaId::EventOrder);
        let order = match self.gateway.complete(&req).map(|r| r.value::<EventOrderOut>()) {
            Ok(Ok(v)) if is_permutation(&v.order, groups.len()) => v.order,
            other => {
                if !matches!(other, Ok(Ok(_))) || groups.len() > 1 {
                    draft.flags.push(ExtractionFlag::new(FlagCode::OrderRejected, "key_events", "event order unusable; story order kept"));
                }
                (0..groups.len()).collect()
            }
        };

        for (index, gi) in order.into_iter().enumerate() {
            let activities: Vec<ActivityTuple> = groups[gi].iter().map(|i| actions[i - 1].clone()).collect();
            draft.key_events.push(KeyEvent { index, activities });
        }
        spread_seats(env, &mut draft.key_events);
        for (i, ev) in draft.key_events.iter().enumerate() {
            for (j, a) in ev.activities.iter().enumerate() {
                if a.object_id.is_none() {
                    draft.flags.push(ExtractionFlag::new(
                        FlagCode::NeedsObject,
                        format!("key_events[{i}].activities[{j}].object_id"),
                        format!("no object in the environment fits \"{}\"", a.action),
                    ));
                }
            }
        }
        draft
    }
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    order.len() == n && order.iter().copied().collect::<BTreeSet<_>>() == (0..n).collect()
}

/// Two characters in one event cannot share a seat; move later ones to free seats of the same kind.
pub fn spread_seats(env: &Environment, events: &mut [KeyEvent]) {
    for ev in events {
        let mut used: BTreeSet<ObjectId> = BTreeSet::new();
        for a in &mut ev.activities {
            let Some(id) = a.object_id.clone() else { continue };
            let Some(obj) = env.object(&id) else { continue };
            if !obj.zone.zone_type.is_seated() {
                continue;
            }
            if used.contains(&id) {
                if let Some(free) = env.objects.iter().find(|o| o.asset_id == obj.asset_id && !used.contains(&o.id)) {
                    a.object_id = Some(free.id.clone());
                }
            }
            if let Some(o) = &a.object_id {
                used.insert(o.clone());
            }
        }
    }
}
