use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use super::{accept_suggestion, spread_seats, ExtractError, ExtractionFlag, Extractor, FlagCode};
use crate::env::{validate_environment, RequiredObject, Unplaceable};
use crate::geometry::{Direction, Tile};
use crate::spec::*;

/// Extraction stages, in the only order they can be passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LayoutPending,
    RoomsPending,
    ObjectsPending,
    CharactersPending,
    EventsPending,
    Complete,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::LayoutPending => "layout_pending",
            Stage::RoomsPending => "rooms_pending",
            Stage::ObjectsPending => "objects_pending",
            Stage::CharactersPending => "characters_pending",
            Stage::EventsPending => "events_pending",
            Stage::Complete => "complete",
        }
    }

    fn next(self) -> Stage {
        match self {
            Stage::LayoutPending => Stage::RoomsPending,
            Stage::RoomsPending => Stage::ObjectsPending,
            Stage::ObjectsPending => Stage::CharactersPending,
            Stage::CharactersPending => Stage::EventsPending,
            Stage::EventsPending | Stage::Complete => Stage::Complete,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A draft vignette moving through the stages. Single writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSession {
    pub stage: Stage,
    pub draft: VignetteSpec,
    pub flags: Vec<ExtractionFlag>,
    pub unplaceable: Vec<Unplaceable>,
}

/// An author edit to the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EnvOp {
    /// Text-to-object: the name is resolved to an asset and placed.
    Add { name: String, room: Option<String>, position: Option<Tile>, facing: Option<Direction> },
    Move { object_id: ObjectId, position: Tile, facing: Option<Direction> },
    Remove { object_id: ObjectId },
}

/// An author edit to the key events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EventEdit {
    AddActivity { event: usize, character_id: CharacterId, action: String, object_id: Option<ObjectId> },
    RemoveActivity { event: usize, character_id: CharacterId },
    SetAction { event: usize, character_id: CharacterId, action: String },
    SetObject { event: usize, character_id: CharacterId, object_id: Option<ObjectId> },
    /// Inserts an empty event before position `at` (or at the end).
    InsertEvent { at: usize },
    RemoveEvent { event: usize },
    MoveEvent { from: usize, to: usize },
}

fn double_option<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<String>>, D::Error> {
    Option::<String>::deserialize(d).map(Some)
}

/// Field edits for one character. A persona field set to `null` is blanked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CharacterPatch {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub sprite_id: Option<String>,
    #[serde(default, deserialize_with = "double_option")]
    pub age: Option<Option<String>>,
    #[serde(default, deserialize_with = "double_option")]
    pub personality: Option<Option<String>>,
    #[serde(default, deserialize_with = "double_option")]
    pub social_role: Option<Option<String>>,
    #[serde(default, deserialize_with = "double_option")]
    pub mood: Option<Option<String>>,
    #[serde(default, deserialize_with = "double_option")]
    pub language_style: Option<Option<String>>,
    /// Replaces the stored conversation samples.
    #[serde(default)]
    pub conversation_snippets: Option<Vec<Snippet>>,
    /// Accepted suggestions; only blank fields are written.
    #[serde(default)]
    pub accept: BTreeMap<String, String>,
}

fn title_of(story: &str) -> String {
    let first = story.split(['.', '!', '?', '\n']).map(str::trim).find(|s| !s.is_empty()).unwrap_or("Untitled");
    let mut t: String = first.chars().take(60).collect();
    if first.chars().count() > 60 {
        t.push_str("...");
    }
    t
}

/// Marks objects used by an activity as event objects and demotes event objects nothing uses.
pub fn sync_object_kinds(spec: &mut VignetteSpec) {
    let used: BTreeSet<ObjectId> =
        spec.key_events.iter().flat_map(|e| e.activities.iter().filter_map(|a| a.object_id.clone())).collect();
    for o in &mut spec.environment.objects {
        if used.contains(&o.id) {
            o.kind = ObjectKind::NecessaryEvent;
        } else if o.kind == ObjectKind::NecessaryEvent {
            o.kind = ObjectKind::NecessaryRoom;
        }
    }
}

fn report_of(code: ViolationCode, path: impl Into<String>, message: impl Into<String>) -> ExtractError {
    let mut r = ValidationReport::default();
    r.push(code, path, message);
    ExtractError::Invalid(r)
}

impl ExtractionSession {
    fn require(&self, at_least: Stage) -> Result<(), ExtractError> {
        if self.stage < at_least {
            return Err(ExtractError::StageViolation { expected: at_least, actual: self.stage });
        }
        Ok(())
    }

    fn require_exactly(&self, stage: Stage) -> Result<(), ExtractError> {
        if self.stage != stage {
            return Err(ExtractError::StageViolation { expected: stage, actual: self.stage });
        }
        Ok(())
    }

    /// Everything that must hold for the draft at its current stage.
    pub fn check(&self) -> ValidationReport {
        let spec = &self.draft;
        let mut r = if self.stage >= Stage::EventsPending {
            let mut r = validate_spec(spec);
            if self.stage < Stage::Complete {
                // unassigned objects are allowed until the events are confirmed
                r.retain(|v| v.code != ViolationCode::UnassignedObject);
            }
            r
        } else {
            let mut r = validate_spec(spec);
            r.retain(|v| {
                !matches!(
                    v.code,
                    ViolationCode::UnassignedObject
                        | ViolationCode::UnknownObjectRef
                        | ViolationCode::UnusedEventObject
                        | ViolationCode::EmptyEvent
                        | ViolationCode::RoomLabelEmpty
                )
            });
            r
        };
        if self.stage >= Stage::ObjectsPending {
            let mut env = validate_environment(&spec.environment, &[]);
            env.retain(|v| !r.violations.contains(v));
            r.extend(env);
        }
        if self.stage == Stage::Complete && spec.key_events.is_empty() {
            r.push(ViolationCode::NoKeyEvents, "key_events", "a vignette needs at least one key event");
        }
        r
    }

    fn commit(&mut self, next: ExtractionSession) -> Result<(), ExtractError> {
        let report = next.check();
        if !report.is_empty() {
            return Err(ExtractError::Invalid(report));
        }
        *self = next;
        Ok(())
    }

    /// Confirms the current stage and moves on. Room confirmation goes through [`Extractor::confirm_rooms`].
    pub fn confirm(&mut self, stage: Stage) -> Result<(), ExtractError> {
        self.require_exactly(stage)?;
        if matches!(stage, Stage::LayoutPending | Stage::RoomsPending | Stage::Complete) {
            return Err(ExtractError::StageViolation { expected: Stage::ObjectsPending, actual: self.stage });
        }
        let mut next = self.clone();
        next.stage = stage.next();
        self.commit(next)
    }

    pub fn update_character(&mut self, id: &CharacterId, patch: &CharacterPatch) -> Result<(), ExtractError> {
        self.require(Stage::CharactersPending)?;
        let mut next = self.clone();
        let c = next
            .draft
            .character_mut(id)
            .ok_or_else(|| report_of(ViolationCode::UnknownCharacterRef, "characters", format!("unknown character {id}")))?;
        if let Some(n) = &patch.name {
            c.name = n.trim().to_string();
        }
        if let Some(s) = &patch.sprite_id {
            c.sprite_id = s.clone();
        }
        for (field, value) in [
            ("age", &patch.age),
            ("personality", &patch.personality),
            ("social_role", &patch.social_role),
            ("mood", &patch.mood),
            ("language_style", &patch.language_style),
        ] {
            if let Some(v) = value {
                *c.persona_field_mut(field).expect("persona field") = v.as_ref().map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
            }
        }
        if let Some(snips) = &patch.conversation_snippets {
            c.conversation_snippets = snips.clone();
        }
        for (field, value) in &patch.accept {
            accept_suggestion(c, field, value);
        }
        self.commit(next)
    }

    pub fn update_events(&mut self, edits: &[EventEdit]) -> Result<(), ExtractError> {
        self.require(Stage::EventsPending)?;
        let mut next = self.clone();
        let events = &mut next.draft.key_events;
        let missing = |i: usize| report_of(ViolationCode::EventIndexGap, format!("key_events[{i}]"), format!("no key event {i}"));
        for edit in edits {
            match edit {
                EventEdit::AddActivity { event, character_id, action, object_id } => {
                    let ev = events.get_mut(*event).ok_or_else(|| missing(*event))?;
                    ev.activities.push(ActivityTuple {
                        character_id: character_id.clone(),
                        action: action.trim().to_string(),
                        object_id: object_id.clone(),
                    });
                }
                EventEdit::RemoveActivity { event, character_id } => {
                    events.get_mut(*event).ok_or_else(|| missing(*event))?.activities.retain(|a| &a.character_id != character_id);
                }
                EventEdit::SetAction { event, character_id, action } => {
                    let ev = events.get_mut(*event).ok_or_else(|| missing(*event))?;
                    for a in ev.activities.iter_mut().filter(|a| &a.character_id == character_id) {
                        a.action = action.trim().to_string();
                    }
                }
                EventEdit::SetObject { event, character_id, object_id } => {
                    let ev = events.get_mut(*event).ok_or_else(|| missing(*event))?;
                    for a in ev.activities.iter_mut().filter(|a| &a.character_id == character_id) {
                        a.object_id = object_id.clone();
                    }
                }
                EventEdit::InsertEvent { at } => {
                    let at = (*at).min(events.len());
                    events.insert(at, KeyEvent { index: at, activities: Vec::new() });
                }
                EventEdit::RemoveEvent { event } => {
                    if *event >= events.len() {
                        return Err(missing(*event));
                    }
                    events.remove(*event);
                }
                EventEdit::MoveEvent { from, to } => {
                    if *from >= events.len() || *to >= events.len() {
                        return Err(missing((*from).max(*to)));
                    }
                    let ev = events.remove(*from);
                    events.insert(*to, ev);
                }
            }
            for (i, ev) in events.iter_mut().enumerate() {
                ev.index = i;
            }
        }
        sync_object_kinds(&mut next.draft);
        self.flags.retain(|f| f.code != FlagCode::NeedsObject);
        next.flags.retain(|f| f.code != FlagCode::NeedsObject);
        self.commit(next)
    }
}

impl Extractor {
    /// Runs the first checkpoint: characters, layout and room labels. The draft waits for room confirmation.
    pub fn start(&self, story: &str) -> Result<ExtractionSession, ExtractError> {
        self.check_story(story)?;
        let characters = self.extract_characters(story)?;
        let mut flags = self.pronoun_flags(story);
        let (layout_id, fallback) = self.select_layout(story);
        flags.extend(fallback);
        let labels = self.label_rooms(&layout_id, story)?;
        let layout = self.catalog().layout(&layout_id).ok_or_else(|| ExtractError::UnknownLayout(layout_id.clone()))?;
        let draft = VignetteSpec {
            spec_version: SPEC_VERSION,
            title: title_of(story),
            story_text: story.trim().to_string(),
            environment: layout.instantiate(&labels),
            characters,
            key_events: Vec::new(),
        };
        Ok(ExtractionSession { stage: Stage::RoomsPending, draft, flags, unplaceable: Vec::new() })
    }

    /// Confirms layout and labels, then places objects, decorates and schedules events.
    pub fn confirm_rooms(
        &self,
        session: &mut ExtractionSession,
        layout_id: Option<&str>,
        labels: &BTreeMap<RoomId, String>,
    ) -> Result<(), ExtractError> {
        session.require_exactly(Stage::RoomsPending)?;
        let mut next = session.clone();
        let spec = &mut next.draft;
        let layout_id = layout_id.unwrap_or(&spec.environment.layout_id).to_string();
        let layout = self.catalog().layout(&layout_id).ok_or_else(|| ExtractError::UnknownLayout(layout_id.clone()))?;
        let mut merged: BTreeMap<RoomId, String> = if layout_id == spec.environment.layout_id {
            spec.environment.rooms.iter().map(|r| (r.id.clone(), r.label.clone())).collect()
        } else {
            BTreeMap::new()
        };
        merged.extend(labels.iter().map(|(k, v)| (k.clone(), v.trim().to_string())));
        let mut env = layout.instantiate(&merged);

        let event_objects = self.extract_event_objects(&spec.story_text, &spec.characters, &env);
        let mut required: Vec<RequiredObject> = event_objects.clone();
        required.extend(self.builder().room_necessities(&env, &event_objects));
        let outcome = self.builder().place_objects(&mut env, &required);
        for u in &outcome.unplaceable {
            next.flags.push(ExtractionFlag::new(FlagCode::Unplaceable, "environment.objects", u.to_string()));
        }
        next.unplaceable = outcome.unplaceable;
        self.builder().fill_decorative(&mut env, self.config.decor_density);

        let events = self.extract_events(&spec.story_text, &spec.characters, &env);
        spec.environment = env;
        spec.key_events = events.key_events;
        next.flags.extend(events.flags);
        sync_object_kinds(&mut next.draft);
        next.stage = Stage::ObjectsPending;
        session.commit(next)
    }

    /// Applies environment edits in order; the whole batch is rejected if the result breaks an invariant.
    pub fn update_environment(&self, session: &mut ExtractionSession, ops: &[EnvOp]) -> Result<Vec<ObjectId>, ExtractError> {
        session.require(Stage::ObjectsPending)?;
        let mut next = session.clone();
        let mut touched = Vec::new();
        for op in ops {
            let env = &mut next.draft.environment;
            match op {
                EnvOp::Add { name, room, position, facing } => {
                    let id = match position {
                        None => self.builder().add_object(env, name, room.as_deref()).map_err(unplaceable)?,
                        Some(p) => self.builder().add_object_at(env, name, *p, *facing).map_err(ExtractError::Invalid)?,
                    };
                    touched.push(id);
                }
                EnvOp::Move { object_id, position, facing } => {
                    let o = env
                        .objects
                        .iter_mut()
                        .find(|o| &o.id == object_id)
                        .ok_or_else(|| report_of(ViolationCode::UnknownObjectRef, "environment.objects", format!("unknown object {object_id}")))?;
                    o.position = *position;
                    if let Some(f) = facing {
                        o.facing = *f;
                    }
                    if let Some(room) = env.rooms.iter().find(|r| r.rect.contains(*position)) {
                        o.room_id = room.id.clone();
                    }
                    touched.push(object_id.clone());
                    self.builder().rezone(env).map_err(|e| report_of(ViolationCode::ZoneEmpty, format!("environment.objects.{object_id}"), e.to_string()))?;
                }
                EnvOp::Remove { object_id } => {
                    let before = env.objects.len();
                    env.objects.retain(|o| &o.id != object_id);
                    if env.objects.len() == before {
                        return Err(report_of(ViolationCode::UnknownObjectRef, "environment.objects", format!("unknown object {object_id}")));
                    }
                    env.refresh_walkable();
                }
            }
        }
        let mut report = validate_environment(&next.draft.environment, &next.draft.key_events);
        if !report.is_empty() {
            report.violations.dedup();
            return Err(ExtractError::Invalid(report));
        }
        let env = next.draft.environment.clone();
        spread_seats(&env, &mut next.draft.key_events);
        sync_object_kinds(&mut next.draft);
        session.commit(next)?;
        Ok(touched)
    }
}

fn unplaceable(u: Unplaceable) -> ExtractError {
    report_of(ViolationCode::ZoneUnreachable, "environment.objects", u.to_string())
}
