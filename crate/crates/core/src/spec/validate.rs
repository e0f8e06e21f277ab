use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::*;
use crate::geometry::Rect;

/// Machine-readable violation codes. Each type invariant maps to exactly one code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    UnsupportedVersion,
    NoPlayerCharacter,
    MultiplePlayerCharacters,
    CharCapExceeded,
    CharacterNameEmpty,
    DuplicateId,
    UnknownCharacterRef,
    UnknownObjectRef,
    UnassignedObject,
    EventIndexGap,
    EmptyEvent,
    DuplicateCharacterInEvent,
    TooManyEvents,
    TooManyObjects,
    RoomOutOfGrid,
    RoomOverlap,
    RoomTooSmall,
    RoomLabelEmpty,
    ObjectOverlap,
    ObjectOutsideRoom,
    ObjectNoActions,
    UnusedEventObject,
    ZoneEmpty,
    ZoneOutOfGrid,
    ZoneNotOnFootprint,
    ZoneOverlapsFootprint,
    WalkableMaskMismatch,
    SpawnBlocked,
    ZoneUnreachable,
    NoKeyEvents,
}

impl ViolationCode {
    pub fn as_str(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// JSON-path-like location, e.g. `key_events[1].activities[0].object_id`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { code, path: path.into(), message: message.into() });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn retain(&mut self, f: impl FnMut(&Violation) -> bool) {
        self.violations.retain(f);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{} at {}: {}", v.code, v.path, v.message)?;
        }
        Ok(())
    }
}

/// Soft caps on spec size. Configuration, not format limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecLimits {
    pub max_characters: usize,
    pub max_events: usize,
    pub max_objects: usize,
}

impl Default for SpecLimits {
    fn default() -> Self {
        Self { max_characters: 3, max_events: 12, max_objects: 64 }
    }
}

pub fn validate_spec(spec: &VignetteSpec) -> ValidationReport {
    validate_spec_with(spec, &SpecLimits::default())
}

pub fn validate_spec_with(spec: &VignetteSpec, limits: &SpecLimits) -> ValidationReport {
    use ViolationCode::*;
    let mut r = ValidationReport::default();

    if spec.spec_version > SPEC_VERSION {
        r.push(UnsupportedVersion, "spec_version", format!("version {} is newer than {SPEC_VERSION}", spec.spec_version));
    }

    let pcs = spec.characters.iter().filter(|c| c.is_pc()).count();
    if pcs == 0 {
        r.push(NoPlayerCharacter, "characters", "no character has role PC");
    } else if pcs > 1 {
        r.push(MultiplePlayerCharacters, "characters", format!("{pcs} characters have role PC"));
    }
    if spec.characters.len() > limits.max_characters {
        r.push(
            CharCapExceeded,
            "characters",
            format!("{} characters, at most {} supported", spec.characters.len(), limits.max_characters),
        );
    }
    let mut seen = BTreeSet::new();
    for (i, c) in spec.characters.iter().enumerate() {
        if c.name.trim().is_empty() {
            r.push(CharacterNameEmpty, format!("characters[{i}].name"), "name is empty");
        }
        if !seen.insert(c.id.as_str()) {
            r.push(DuplicateId, format!("characters[{i}].id"), format!("duplicate character id {}", c.id));
        }
    }

    r.extend(validate_environment_shape(&spec.environment, limits));

    if spec.key_events.len() > limits.max_events {
        r.push(
            TooManyEvents,
            "key_events",
            format!("{} key events, at most {}", spec.key_events.len(), limits.max_events),
        );
    }
    let character_ids: BTreeSet<_> = spec.characters.iter().map(|c| &c.id).collect();
    let object_ids: BTreeSet<_> = spec.environment.objects.iter().map(|o| &o.id).collect();
    let mut referenced = BTreeSet::new();
    for (i, ev) in spec.key_events.iter().enumerate() {
        let base = format!("key_events[{i}]");
        if ev.index != i {
            r.push(EventIndexGap, format!("{base}.index"), format!("expected index {i}, found {}", ev.index));
        }
        if ev.activities.is_empty() {
            r.push(EmptyEvent, format!("{base}.activities"), "key event has no activities");
        }
        let mut in_event = BTreeSet::new();
        for (j, a) in ev.activities.iter().enumerate() {
            let path = format!("{base}.activities[{j}]");
            if !character_ids.contains(&a.character_id) {
                r.push(UnknownCharacterRef, format!("{path}.character_id"), format!("unknown character {}", a.character_id));
            }
            if !in_event.insert(&a.character_id) {
                r.push(
                    DuplicateCharacterInEvent,
                    format!("{path}.character_id"),
                    format!("{} appears twice in one key event", a.character_id),
                );
            }
            match &a.object_id {
                None => r.push(UnassignedObject, format!("{path}.object_id"), format!("no object chosen for \"{}\"", a.action)),
                Some(o) if !object_ids.contains(o) => {
                    r.push(UnknownObjectRef, format!("{path}.object_id"), format!("unknown object {o}"))
                }
                Some(o) => {
                    referenced.insert(o);
                }
            }
        }
    }
    for (i, o) in spec.environment.objects.iter().enumerate() {
        if o.kind == ObjectKind::NecessaryEvent && !referenced.contains(&o.id) {
            r.push(
                UnusedEventObject,
                format!("environment.objects[{i}].kind"),
                format!("{} is marked necessary_event but no activity uses it", o.id),
            );
        }
    }
    r
}

/// Geometric invariants of an environment on its own.
pub fn validate_environment_shape(env: &Environment, limits: &SpecLimits) -> ValidationReport {
    use ViolationCode::*;
    let mut r = ValidationReport::default();
    let grid = Rect::new(0, 0, env.grid_width, env.grid_height);

    let mut room_ids = BTreeMap::new();
    for (i, room) in env.rooms.iter().enumerate() {
        let path = format!("environment.rooms[{i}]");
        if room_ids.insert(room.id.clone(), i).is_some() {
            r.push(DuplicateId, format!("{path}.id"), format!("duplicate room id {}", room.id));
        }
        if !grid.contains_rect(&room.rect) {
            r.push(RoomOutOfGrid, format!("{path}.rect"), "room extends outside the grid");
        }
        if room.rect.w < 2 || room.rect.h < 2 {
            r.push(RoomTooSmall, format!("{path}.rect"), "rooms must be at least 2x2");
        }
        if room.label.trim().is_empty() {
            r.push(RoomLabelEmpty, format!("{path}.label"), "room has no label");
        }
        for (j, other) in env.rooms.iter().enumerate().skip(i + 1) {
            if room.rect.intersects(&other.rect) {
                r.push(RoomOverlap, format!("{path}.rect"), format!("overlaps environment.rooms[{j}]"));
            }
        }
    }

    if env.objects.len() > limits.max_objects {
        r.push(TooManyObjects, "environment.objects", format!("{} objects, at most {}", env.objects.len(), limits.max_objects));
    }
    let mut object_ids = BTreeSet::new();
    for (i, o) in env.objects.iter().enumerate() {
        let path = format!("environment.objects[{i}]");
        if !object_ids.insert(o.id.as_str()) {
            r.push(DuplicateId, format!("{path}.id"), format!("duplicate object id {}", o.id));
        }
        if o.actions.iter().all(|a| a.trim().is_empty()) {
            r.push(ObjectNoActions, format!("{path}.actions"), "object has no actions");
        }
        let rect = o.rect();
        match env.room(&o.room_id) {
            Some(room) if room.rect.contains_rect(&rect) => {}
            Some(_) => r.push(ObjectOutsideRoom, format!("{path}.position"), format!("footprint leaves room {}", o.room_id)),
            None => r.push(ObjectOutsideRoom, format!("{path}.room_id"), format!("unknown room {}", o.room_id)),
        }
        for (j, other) in env.objects.iter().enumerate().skip(i + 1) {
            if rect.intersects(&other.rect()) {
                r.push(ObjectOverlap, format!("{path}.position"), format!("footprint overlaps environment.objects[{j}] ({})", other.id));
            }
        }
        let zpath = format!("{path}.zone.tiles");
        if o.zone.tiles.is_empty() {
            r.push(ZoneEmpty, &zpath, "trigger zone has no tiles");
        }
        if o.zone.tiles.iter().any(|t| !grid.contains(*t)) {
            r.push(ZoneOutOfGrid, &zpath, "trigger zone leaves the grid");
        }
        match o.zone.zone_type {
            ZoneType::On | ZoneType::Partial => {
                if o.zone.tiles.iter().any(|t| !rect.contains(*t)) {
                    r.push(ZoneNotOnFootprint, &zpath, "seated zone must lie on the footprint");
                }
            }
            ZoneType::Around | ZoneType::Directional => {
                if o.zone.tiles.iter().any(|t| rect.contains(*t)) {
                    r.push(ZoneOverlapsFootprint, &zpath, "zone must not intersect the footprint");
                }
            }
        }
    }

    if env.walkable_mask != env.derive_walkable() {
        r.push(WalkableMaskMismatch, "environment.walkable_mask", "mask does not match rooms, doors and objects");
    }
    r
}
