//! Greedy object placement and decorative fill.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pathing::reachable_from;
use super::zones::{compute_trigger_tiles, zone_reachable};
use super::EnvBuilder;
use crate::catalog::{normalize_name, AssetDef};
use crate::geometry::{Direction, Mask, Rect, Tile};
use crate::llm::{PlacementHintsOut, PromptRequest, TemplateId};
use crate::spec::{Environment, ObjectId, ObjectInstance, ObjectKind, Room, TriggerZone, ZoneType};

/// An object the environment must contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredObject {
    pub name: String,
    /// A room id or label.
    pub room_hint: Option<String>,
    pub kind: ObjectKind,
}

impl RequiredObject {
    pub fn new(name: impl Into<String>, room_hint: Option<&str>, kind: ObjectKind) -> Self {
        Self { name: name.into(), room_hint: room_hint.map(str::to_string), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("UNPLACEABLE({object}): {}", reasons.join("; "))]
pub struct Unplaceable {
    pub object: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub placed: Vec<ObjectId>,
    pub unplaceable: Vec<Unplaceable>,
}

/// Soft rule: `object` should stand within `max_distance` of an `anchor`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Proximity {
    object: String,
    anchor: String,
    max_distance: u32,
}

#[derive(Debug, Default)]
struct Hints {
    near: BTreeSet<Proximity>,
    wall: BTreeSet<String>,
}

impl Hints {
    /// Positive when the rule holds, a penalty growing with the gap otherwise.
    fn score(&self, asset: &str, rect: &Rect, room: &Room, env: &Environment) -> i64 {
        let mut score = 0;
        for o in env.objects.iter().filter(|o| o.room_id == room.id) {
            for rule in &self.near {
                let related = (rule.object == asset && rule.anchor == o.asset_id)
                    || (rule.anchor == asset && rule.object == o.asset_id);
                if related {
                    let gap = rect.gap(&o.rect());
                    score += if gap < rule.max_distance { 10 } else { -(gap as i64) };
                }
            }
        }
        score
    }
}

struct Candidate {
    rect: Rect,
    facing: Direction,
    zone: BTreeSet<Tile>,
    score: i64,
}

/// Room walls a rectangle touches, as the facing that points away from each.
fn wall_facings(rect: &Rect, room: &Rect) -> Vec<Direction> {
    let mut out = Vec::new();
    if rect.y == room.y {
        out.push(Direction::South);
    }
    if rect.bottom() == room.bottom() {
        out.push(Direction::North);
    }
    if rect.x == room.x {
        out.push(Direction::East);
    }
    if rect.right() == room.right() {
        out.push(Direction::West);
    }
    out
}

fn needs_facing(zone: ZoneType) -> bool {
    matches!(zone, ZoneType::Directional | ZoneType::Partial)
}

pub(crate) fn unique_object_id(env: &Environment, base: &str) -> ObjectId {
    let base = if base.is_empty() { "object" } else { base };
    if env.object(&ObjectId::new(base)).is_none() {
        return ObjectId::new(base);
    }
    (2..).map(|i| ObjectId::new(format!("{base}_{i}"))).find(|id| env.object(id).is_none()).expect("ids are unbounded")
}

/// Reachability facts the next placement must preserve.
struct Baseline {
    reach: Mask,
}

impl Baseline {
    fn of(env: &Environment, spawn: Tile) -> Self {
        Self { reach: reachable_from(&env.derive_walkable(), spawn) }
    }
}

impl EnvBuilder {
    /// Necessary-room objects for every room label, skipping classes an event object already covers.
    pub fn room_necessities(&self, env: &Environment, event_objects: &[RequiredObject]) -> Vec<RequiredObject> {
        let mut out = Vec::new();
        let event_assets: Vec<(String, Option<String>)> = event_objects
            .iter()
            .map(|r| (self.asset_for(&r.name).id, r.room_hint.as_deref().map(normalize_name)))
            .collect();
        for room in &env.rooms {
            let label = normalize_name(&room.label);
            for asset in self.catalog().necessary_for(&room.label) {
                let covered = event_assets
                    .iter()
                    .any(|(id, hint)| id == &asset.id && hint.as_ref().is_none_or(|h| h == &label || h == room.id.as_str()));
                let present = env.objects.iter().any(|o| o.asset_id == asset.id && o.room_id == room.id);
                if !covered && !present {
                    out.push(RequiredObject::new(&asset.name, Some(room.id.as_str()), ObjectKind::NecessaryRoom));
                }
            }
        }
        out
    }

    /// Greedily places `required` into `env`, keeping every trigger zone, door and prior object reachable.
    pub fn place_objects(&self, env: &mut Environment, required: &[RequiredObject]) -> PlacementOutcome {
        let mut outcome = PlacementOutcome::default();
        let Some(spawn) = env.spawn() else {
            outcome.unplaceable = required
                .iter()
                .map(|r| Unplaceable { object: r.name.clone(), reasons: vec!["environment has no rooms".into()] })
                .collect();
            return outcome;
        };
        let mut order: Vec<(&RequiredObject, AssetDef)> = required.iter().map(|r| (r, self.asset_for(&r.name))).collect();
        let rank = |k: ObjectKind| match k {
            ObjectKind::NecessaryEvent => 0,
            ObjectKind::NecessaryRoom => 1,
            ObjectKind::Decorative => 2,
        };
        order.sort_by(|(ra, aa), (rb, ab)| {
            rank(ra.kind)
                .cmp(&rank(rb.kind))
                .then(ab.footprint.area().cmp(&aa.footprint.area()))
                .then(normalize_name(&ra.name).cmp(&normalize_name(&rb.name)))
        });
        let hints = self.hints_for(env, &order);
        for (req, asset) in order {
            match self.place_one(env, &asset, req, spawn, &hints, false) {
                Ok(id) => outcome.placed.push(id),
                Err(e) => {
                    tracing::warn!(object = %req.name, reasons = ?e.reasons, "unplaceable");
                    outcome.unplaceable.push(e);
                }
            }
        }
        outcome
    }

    /// Adds decorative classes per room label, `ceil(density * classes)` per room, in catalog order.
    ///
    /// Best effort: a class with no position that keeps every previously reachable tile reachable is skipped.
    pub fn fill_decorative(&self, env: &mut Environment, density: f64) -> Vec<ObjectId> {
        let density = density.clamp(0.0, 1.0);
        let Some(spawn) = env.spawn() else { return Vec::new() };
        let hints = self.hints_for(env, &[]);
        let mut added = Vec::new();
        for room in env.rooms.clone() {
            let classes: Vec<AssetDef> = self.catalog().decorative_for(&room.label).into_iter().cloned().collect();
            let count = (density * classes.len() as f64).ceil() as usize;
            for asset in classes.into_iter().take(count) {
                let req = RequiredObject::new(&asset.name, Some(room.id.as_str()), ObjectKind::Decorative);
                if let Ok(id) = self.place_one(env, &asset, &req, spawn, &hints, true) {
                    added.push(id);
                }
            }
        }
        added
    }

    /// Text-to-object: resolves `name` and places it in `room_hint` (or anywhere it fits).
    pub fn add_object(&self, env: &mut Environment, name: &str, room_hint: Option<&str>) -> Result<ObjectId, Unplaceable> {
        let spawn = env
            .spawn()
            .ok_or_else(|| Unplaceable { object: name.to_string(), reasons: vec!["environment has no rooms".into()] })?;
        let asset = self.asset_for(name);
        let req = RequiredObject::new(name, room_hint, ObjectKind::Decorative);
        let hints = self.hints_for(env, &[]);
        self.place_one(env, &asset, &req, spawn, &hints, false)
    }

    /// Text-to-object at an exact spot chosen by the author. Overlaps and reachability are left to
    /// [`super::validate_environment`], so the author sees the same report as for a move.
    pub fn add_object_at(
        &self,
        env: &mut Environment,
        name: &str,
        position: Tile,
        facing: Option<Direction>,
    ) -> Result<ObjectId, crate::spec::ValidationReport> {
        use crate::spec::{ValidationReport, ViolationCode};
        let asset = self.asset_for(name);
        let rect = Rect::at(position, asset.footprint);
        let mut report = ValidationReport::default();
        let Some(room) = env.rooms.iter().find(|r| r.rect.contains_rect(&rect)) else {
            report.push(ViolationCode::ObjectOutsideRoom, "environment.objects", format!("{name} at {position} is not inside a room"));
            return Err(report);
        };
        let facing = facing.unwrap_or(Direction::South);
        let zone = compute_trigger_tiles(position, asset.footprint, asset.zone, facing, &env.floor_mask(), asset.partial)
            .map_err(|e| {
                report.push(ViolationCode::ZoneEmpty, "environment.objects", e.to_string());
                report.clone()
            })?;
        let obj = ObjectInstance {
            id: unique_object_id(env, &asset.id),
            name: asset.name.clone(),
            room_id: room.id.clone(),
            position,
            footprint: asset.footprint,
            actions: asset.actions.clone(),
            zone: TriggerZone { zone_type: asset.zone, tiles: zone },
            kind: ObjectKind::Decorative,
            facing,
            asset_id: asset.id.clone(),
        };
        let id = obj.id.clone();
        env.objects.push(obj);
        env.refresh_walkable();
        Ok(id)
    }

    /// Recomputes every zone from the current floor (after moves or removals).
    pub fn rezone(&self, env: &mut Environment) -> Result<(), super::ZoneError> {
        let floor = env.floor_mask();
        for o in &mut env.objects {
            let partial = self.catalog().asset(&o.asset_id).and_then(|a| a.partial);
            super::rezone_object(o, &floor, partial)?;
        }
        env.refresh_walkable();
        Ok(())
    }

    fn hints_for(&self, env: &Environment, order: &[(&RequiredObject, AssetDef)]) -> Hints {
        let mut hints = Hints::default();
        for a in &self.catalog().assets {
            for n in &a.near {
                hints.near.insert(Proximity { object: a.id.clone(), anchor: n.asset.clone(), max_distance: n.max_distance });
            }
        }
        let Some(gw) = self.gateway() else { return hints };
        let mut per_room: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (req, asset) in order {
            let room = req
                .room_hint
                .as_deref()
                .and_then(|h| rooms_for_hint(env, h).first().map(|r| r.label.clone()))
                .unwrap_or_else(|| "room".into());
            per_room.entry(room).or_default().push(asset.name.clone());
        }
        for (label, names) in per_room {
            let Ok(req) = PromptRequest::new(TemplateId::PlaceReasoning, [("room_label", label.clone()), ("objects", names.join(", "))])
            else {
                continue;
            };
            let out: PlacementHintsOut = match gw.complete(&req).map(|r| r.value()) {
                Ok(Ok(v)) => v,
                _ => continue,
            };
            let id_of = |n: &str| self.catalog().find_asset(n).map(|a| a.id.clone());
            for n in out.near {
                if let (Some(object), Some(anchor)) = (id_of(&n.object), id_of(&n.anchor)) {
                    hints.near.insert(Proximity { object, anchor, max_distance: n.max_distance.max(1) });
                }
            }
            hints.wall.extend(out.wall.iter().filter_map(|w| id_of(w)));
        }
        hints
    }

    fn candidate_rooms<'e>(&self, env: &'e Environment, asset: &AssetDef, hint: Option<&str>) -> Vec<&'e Room> {
        if let Some(h) = hint {
            let hinted = rooms_for_hint(env, h);
            if !hinted.is_empty() {
                return hinted;
            }
        }
        let fits = |r: &&Room| {
            let l = normalize_name(&r.label);
            asset.necessary_for.iter().chain(&asset.decorative_for).any(|x| normalize_name(x) == l)
        };
        let mut rooms: Vec<&Room> = env.rooms.iter().filter(fits).collect();
        rooms.extend(env.rooms.iter().filter(|r| !fits(r)));
        rooms
    }

    fn place_one(
        &self,
        env: &mut Environment,
        asset: &AssetDef,
        req: &RequiredObject,
        spawn: Tile,
        hints: &Hints,
        keep_all_reachable: bool,
    ) -> Result<ObjectId, Unplaceable> {
        let mut reasons = Vec::new();
        let floor = env.floor_mask();
        let baseline = Baseline::of(env, spawn);
        let wall = asset.wall || hints.wall.contains(&asset.id);
        let rooms: Vec<Room> = self.candidate_rooms(env, asset, req.room_hint.as_deref()).into_iter().cloned().collect();
        for room in &rooms {
            if room.rect.w < asset.footprint.w || room.rect.h < asset.footprint.h {
                reasons.push(format!("{} ({}) is smaller than the {}x{} footprint", room.label, room.id, asset.footprint.w, asset.footprint.h));
                continue;
            }
            let mut cands = Vec::new();
            let (mut blocked, mut off_wall, mut no_zone) = (0, 0, 0);
            for pos in room.rect.tiles() {
                let rect = Rect::at(pos, asset.footprint);
                if !room.rect.contains_rect(&rect) {
                    continue;
                }
                if rect.contains(spawn) || env.objects.iter().any(|o| o.rect().intersects(&rect)) {
                    blocked += 1;
                    continue;
                }
                let facings = if wall {
                    wall_facings(&rect, &room.rect)
                } else if needs_facing(asset.zone) {
                    vec![Direction::South, Direction::North, Direction::East, Direction::West]
                } else {
                    vec![Direction::South]
                };
                if facings.is_empty() {
                    off_wall += 1;
                    continue;
                }
                let facings = if needs_facing(asset.zone) { facings } else { facings[..1].to_vec() };
                for facing in facings {
                    match compute_trigger_tiles(pos, asset.footprint, asset.zone, facing, &floor, asset.partial) {
                        Ok(zone) => {
                            let score = hints.score(&asset.id, &rect, room, env);
                            cands.push(Candidate { rect, facing, zone, score });
                        }
                        Err(_) => no_zone += 1,
                    }
                }
            }
            // stable: equal scores keep scan order
            cands.sort_by(|a, b| b.score.cmp(&a.score));
            for c in cands {
                let obj = ObjectInstance {
                    id: unique_object_id(env, &asset.id),
                    name: asset.name.clone(),
                    room_id: room.id.clone(),
                    position: Tile::new(c.rect.x, c.rect.y),
                    footprint: asset.footprint,
                    actions: asset.actions.clone(),
                    zone: TriggerZone { zone_type: asset.zone, tiles: c.zone },
                    kind: req.kind,
                    facing: c.facing,
                    asset_id: asset.id.clone(),
                };
                env.objects.push(obj);
                if self.still_reachable(env, spawn, &baseline, keep_all_reachable.then_some(&c.rect)) {
                    env.refresh_walkable();
                    return Ok(env.objects.last().expect("just pushed").id.clone());
                }
                env.objects.pop();
            }
            if blocked + off_wall + no_zone > 0 || !reasons.is_empty() {
                let mut why = Vec::new();
                if blocked > 0 {
                    why.push(format!("{blocked} positions overlap objects or the spawn"));
                }
                if off_wall > 0 {
                    why.push(format!("{off_wall} positions are off the wall"));
                }
                if no_zone > 0 {
                    why.push(format!("{no_zone} orientations leave no trigger tile"));
                }
                why.push("every remaining position would cut off a path".into());
                reasons.push(format!("{} ({}): {}", room.label, room.id, why.join(", ")));
            } else {
                reasons.push(format!("{} ({}): every position would cut off a path", room.label, room.id));
            }
        }
        if rooms.is_empty() {
            reasons.push("no rooms".into());
        }
        Err(Unplaceable { object: req.name.clone(), reasons })
    }

    /// Checks the environment (last object freshly pushed) against the pre-placement baseline.
    fn still_reachable(&self, env: &Environment, spawn: Tile, baseline: &Baseline, strict: Option<&Rect>) -> bool {
        let walkable = env.derive_walkable();
        let standable = env.standable_mask();
        let reach = reachable_from(&walkable, spawn);
        if env.objects.iter().any(|o| !zone_reachable(&o.zone, &walkable, &standable, &reach)) {
            return false;
        }
        if env.doors.iter().any(|d| !reach.get(*d)) {
            return false;
        }
        if let Some(footprint) = strict {
            return baseline.reach.tiles().all(|t| footprint.contains(t) || reach.get(t));
        }
        true
    }
}

/// Rooms whose id or label matches a hint, in room order.
pub(crate) fn rooms_for_hint<'e>(env: &'e Environment, hint: &str) -> Vec<&'e Room> {
    let h = normalize_name(hint);
    let by_id: Vec<&Room> = env.rooms.iter().filter(|r| r.id.as_str() == hint.trim()).collect();
    if !by_id.is_empty() {
        return by_id;
    }
    env.rooms.iter().filter(|r| normalize_name(&r.label) == h).collect()
}
