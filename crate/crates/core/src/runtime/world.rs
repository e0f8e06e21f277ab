use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::command::{CommandKind, ViewerTrace};
use super::log::{EventLog, RecordKind};
use crate::env::{find_path, reachable_from, usable_zone_tiles, validate_environment};
use crate::geometry::{Mask, Tile};
use crate::planner::{idle_tuple, resolve, ChatOutcome, Origin, PastActivity, PlanPair, Planner, Storyline};
use crate::spec::{validate_spec, ActivityTuple, CharacterId, ObjectId, Snippet, ValidationReport, ViolationCode, VignetteSpec};

const WORLD: &str = "world";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    /// Ticks an activity takes, counted while the character is in the zone.
    pub activity_ticks: u64,
    /// Idle ticks under a glow cue that count as diverging.
    pub idle_threshold_ticks: u64,
    /// Minimum ticks between two inner-voice cues.
    pub inner_voice_cooldown_ticks: u64,
    /// Converts provider latency into ticks.
    pub ms_per_tick: u64,
    /// Chat lines per NPC passed back as history.
    pub chat_history: usize,
    /// Run plan requests on worker threads and only use them once they have arrived.
    /// Off by default: requests are served inline so runs are reproducible.
    pub realtime_planning: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            activity_ticks: 80,
            idle_threshold_ticks: 100,
            inner_voice_cooldown_ticks: 150,
            ms_per_tick: 100,
            chat_history: 8,
            realtime_planning: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Ended,
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("spec is not runnable: {0}")]
    Invalid(ValidationReport),
    #[error("unknown NPC {0}")]
    UnknownNpc(CharacterId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("NOT_IN_ZONE: {0}")]
    NotInZone(ObjectId),
    #[error("the vignette has ended")]
    Ended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub tuple: ActivityTuple,
    pub origin: Origin,
    /// Key event the tuple belongs to, for authored activities.
    pub event: Option<usize>,
    /// Pending key event when the activity started (or was assigned, before that); `None` after the last one.
    pub window: Option<usize>,
    pub remaining: u64,
    pub started_at: Option<u64>,
    pub paused: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatLine {
    pub tick: u64,
    pub npc_id: CharacterId,
    pub speaker: CharacterId,
    pub text: String,
    pub withheld: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerVoice {
    pub tick: u64,
    pub text: String,
}

/// Read-only copy of the world for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub status: Status,
    pub positions: BTreeMap<CharacterId, Tile>,
    pub activities: BTreeMap<CharacterId, Activity>,
    pub glow: BTreeSet<ObjectId>,
    pub chat_log: Vec<ChatLine>,
    pub inner_voice_log: Vec<InnerVoice>,
    pub completed_events: usize,
    pub pending_event: Option<usize>,
}

enum PlanSlot {
    Ready(PlanPair),
    Running(JoinHandle<PlanPair>),
}

struct Actor {
    position: Tile,
    activity: Option<Activity>,
    path: Vec<Tile>,
    plan: Option<PlanSlot>,
}

/// Branch-and-bottleneck simulation of one viewing session.
pub struct World {
    spec: Arc<VignetteSpec>,
    config: RuntimeConfig,
    planner: Arc<Planner>,
    tick: u64,
    status: Status,
    pc_id: CharacterId,
    actors: BTreeMap<CharacterId, Actor>,
    storyline: Storyline,
    glow: BTreeSet<ObjectId>,
    log: EventLog,
    chat_log: Vec<ChatLine>,
    inner_voice_log: Vec<InnerVoice>,
    /// Ticks already spent on authored tuples, kept across pauses and abandons.
    progress: BTreeMap<(usize, CharacterId), u64>,
    completed_events: usize,
    pc_divergent: bool,
    pc_idle: u64,
    pc_moved: bool,
    last_voice: Option<u64>,
    walkable: Mask,
    standable: Mask,
    zones: BTreeMap<ObjectId, BTreeSet<Tile>>,
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World").field("tick", &self.tick).field("status", &self.status).finish_non_exhaustive()
    }
}

/// Everything that keeps a spec from being played.
pub fn runnable_report(spec: &VignetteSpec) -> ValidationReport {
    let mut r = validate_spec(spec);
    let env = validate_environment(&spec.environment, &spec.key_events);
    for v in env.violations {
        if !r.violations.contains(&v) {
            r.violations.push(v);
        }
    }
    if spec.key_events.is_empty() {
        r.push(ViolationCode::NoKeyEvents, "key_events", "a vignette needs at least one key event");
    }
    r
}

impl World {
    pub fn new(spec: VignetteSpec, planner: Planner, config: RuntimeConfig) -> Result<Self, RuntimeError> {
        Self::with_shared(Arc::new(spec), Arc::new(planner), config)
    }

    pub fn with_shared(spec: Arc<VignetteSpec>, planner: Arc<Planner>, config: RuntimeConfig) -> Result<Self, RuntimeError> {
        let report = runnable_report(&spec);
        if !report.is_empty() {
            return Err(RuntimeError::Invalid(report));
        }
        let env = &spec.environment;
        let walkable = env.derive_walkable();
        let standable = env.standable_mask();
        let spawn = env.spawn().expect("validated spawn");
        let reach = reachable_from(&walkable, spawn);
        let zones = env.objects.iter().map(|o| (o.id.clone(), usable_zone_tiles(&standable, o))).collect();
        let pc_id = spec.pc().expect("validated pc").id.clone();
        let mut actors = BTreeMap::new();
        let mut rooms: Vec<_> = env.rooms.iter().collect();
        rooms.sort_by(|a, b| a.id.cmp(&b.id));
        let mut npc_index = 0;
        for c in &spec.characters {
            let position = if c.is_pc() {
                spawn
            } else {
                npc_index += 1;
                let room = rooms[npc_index % rooms.len()];
                anchor(&reach, room.rect.center()).unwrap_or(spawn)
            };
            actors.insert(c.id.clone(), Actor { position, activity: None, path: Vec::new(), plan: None });
        }
        let mut w = Self {
            storyline: Storyline::new(&spec),
            spec,
            config,
            planner,
            tick: 0,
            status: Status::Running,
            pc_id,
            actors,
            glow: BTreeSet::new(),
            log: EventLog::new(),
            chat_log: Vec::new(),
            inner_voice_log: Vec::new(),
            progress: BTreeMap::new(),
            completed_events: 0,
            pc_divergent: false,
            pc_idle: 0,
            pc_moved: false,
            last_voice: None,
            walkable,
            standable,
            zones,
        };
        let positions: BTreeMap<_, _> = w.actors.iter().map(|(id, a)| (id.as_str().to_string(), json!(a.position))).collect();
        w.log.push(0, WORLD, RecordKind::Init, json!({ "mode": w.planner.mode().to_string(), "positions": positions }));
        w.refresh_glow();
        Ok(w)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn spec(&self) -> &VignetteSpec {
        &self.spec
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.config
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn glow(&self) -> &BTreeSet<ObjectId> {
        &self.glow
    }

    pub fn storyline(&self) -> &Storyline {
        &self.storyline
    }

    pub fn pc_id(&self) -> &CharacterId {
        &self.pc_id
    }

    pub fn position(&self, id: &CharacterId) -> Option<Tile> {
        self.actors.get(id).map(|a| a.position)
    }

    pub fn activity(&self, id: &CharacterId) -> Option<&Activity> {
        self.actors.get(id).and_then(|a| a.activity.as_ref())
    }

    pub fn completed_events(&self) -> usize {
        self.completed_events
    }

    /// Tiles from which `object` can be used.
    pub fn zone_tiles(&self, object: &ObjectId) -> Option<&BTreeSet<Tile>> {
        self.zones.get(object)
    }

    pub fn walkable(&self) -> &Mask {
        &self.walkable
    }

    pub fn standable(&self) -> &Mask {
        &self.standable
    }

    pub fn snapshot(&self) -> WorldState {
        WorldState {
            tick: self.tick,
            status: self.status,
            positions: self.actors.iter().map(|(id, a)| (id.clone(), a.position)).collect(),
            activities: self.actors.iter().filter_map(|(id, a)| Some((id.clone(), a.activity.clone()?))).collect(),
            glow: self.glow.clone(),
            chat_log: self.chat_log.clone(),
            inner_voice_log: self.inner_voice_log.clone(),
            completed_events: self.completed_events,
            pending_event: self.storyline.next_key_event,
        }
    }

    /// Advances one tick, applying the viewer's commands first.
    pub fn step(&mut self, commands: &[CommandKind]) {
        if self.status == Status::Ended {
            for c in commands {
                self.log.push(self.tick, WORLD, RecordKind::Warning, json!({ "message": "command ignored, the vignette has ended", "command": c }));
            }
            return;
        }
        self.pc_moved = false;
        for c in commands {
            self.apply(c);
        }
        self.tick_pc();
        let npcs: Vec<CharacterId> = self.actors.keys().filter(|id| **id != self.pc_id).cloned().collect();
        for id in npcs {
            self.tick_npc(&id);
        }
        self.advance_bottleneck();
        self.refresh_glow();
        self.cue_pc();
        self.tick += 1;
    }

    fn apply(&mut self, c: &CommandKind) {
        match c {
            CommandKind::Move { direction } => {
                let pc = self.actors.get_mut(&self.pc_id).expect("pc");
                let to = pc.position.step(*direction);
                if self.standable.get(to) {
                    pc.position = to;
                    self.pc_moved = true;
                } else {
                    let at = pc.position;
                    self.log.push(self.tick, self.pc_id.as_str(), RecordKind::Blocked, json!({ "direction": direction, "position": at }));
                }
            }
            CommandKind::Interact { object_id } => {
                if let Err(e) = self.try_interact(object_id) {
                    let kind = if matches!(e, RuntimeError::NotInZone(_)) { RecordKind::NotInZone } else { RecordKind::Warning };
                    self.log.push(self.tick, self.pc_id.as_str(), kind, json!({ "object": object_id, "message": e.to_string() }));
                }
            }
            CommandKind::Chat { npc_id, text } => {
                if let Err(e) = self.send_chat(npc_id, text) {
                    self.log.push(self.tick, self.pc_id.as_str(), RecordKind::Warning, json!({ "message": e.to_string() }));
                }
            }
            CommandKind::Wait { .. } => {}
        }
    }

    /// The PC starts an activity at `object_id`: its authored one when the object belongs to
    /// the PC's part of the pending event, otherwise a divergent one named after the object's
    /// first action.
    pub fn try_interact(&mut self, object_id: &ObjectId) -> Result<(), RuntimeError> {
        if self.status == Status::Ended {
            return Err(RuntimeError::Ended);
        }
        let spec = Arc::clone(&self.spec);
        let obj = spec.object(object_id).ok_or_else(|| RuntimeError::UnknownObject(object_id.clone()))?;
        let pos = self.actors[&self.pc_id].position;
        if !obj.zone.tiles.contains(&pos) {
            return Err(RuntimeError::NotInZone(object_id.clone()));
        }
        let window = self.storyline.next_key_event;
        let authored = window.and_then(|k| {
            let t = spec.key_events[k].activity_of(&self.pc_id)?;
            (t.object_id.as_ref() == Some(object_id) && !self.storyline.is_completed(k, &self.pc_id)).then_some((k, t))
        });
        let act = match authored {
            Some((k, t)) => {
                let done = self.progress.get(&(k, self.pc_id.clone())).copied().unwrap_or(0);
                self.pc_divergent = false;
                Activity {
                    tuple: ActivityTuple { character_id: self.pc_id.clone(), action: t.action.clone(), object_id: Some(object_id.clone()) },
                    origin: Origin::Authored,
                    event: Some(k),
                    window,
                    remaining: self.config.activity_ticks.saturating_sub(done).max(1),
                    started_at: None,
                    paused: false,
                }
            }
            None => {
                if let Some(k) = window {
                    if spec.key_events[k].activity_of(&self.pc_id).is_some() && !self.storyline.is_completed(k, &self.pc_id) {
                        self.pc_divergent = true;
                    }
                }
                Activity {
                    tuple: ActivityTuple { character_id: self.pc_id.clone(), action: obj.actions[0].clone(), object_id: Some(object_id.clone()) },
                    origin: Origin::DivergentPc,
                    event: None,
                    window,
                    remaining: self.config.activity_ticks,
                    started_at: None,
                    paused: false,
                }
            }
        };
        if let Some(cur) = &self.actors[&self.pc_id].activity {
            if cur.tuple == act.tuple && cur.origin == act.origin {
                return Ok(());
            }
        }
        let pc_id = self.pc_id.clone();
        self.end_activity(&pc_id, false);
        self.begin(&pc_id, act);
        Ok(())
    }

    fn tick_pc(&mut self) {
        let id = self.pc_id.clone();
        let pos = self.actors[&id].position;
        let Some(act) = self.actors.get_mut(&id).and_then(|a| a.activity.as_mut()) else {
            self.pc_idle = if self.pc_moved { 0 } else { self.pc_idle + 1 };
            return;
        };
        let in_zone = act.tuple.object_id.as_ref().is_none_or(|o| self.spec.object(o).is_some_and(|o| o.zone.tiles.contains(&pos)));
        if !in_zone {
            if !act.paused {
                act.paused = true;
                let payload = json!({ "action": act.tuple.action, "object": act.tuple.object_id });
                self.log.push(self.tick, id.as_str(), RecordKind::ActivityPaused, payload);
            }
            self.pc_idle = if self.pc_moved { 0 } else { self.pc_idle + 1 };
            return;
        }
        if act.paused {
            act.paused = false;
            let payload = json!({ "action": act.tuple.action, "object": act.tuple.object_id });
            self.log.push(self.tick, id.as_str(), RecordKind::ActivityResumed, payload);
        }
        self.pc_idle = 0;
        self.run_timer(&id);
    }

    fn tick_npc(&mut self, id: &CharacterId) {
        if self.actors[id].activity.is_none() {
            self.choose_next(id, false);
        }
        let Some(act) = self.actors[id].activity.clone() else {
            return;
        };
        if act.started_at.is_none() {
            if !self.npc_in_zone(id, &act) {
                let actor = self.actors.get_mut(id).expect("npc");
                if actor.path.is_empty() {
                    return;
                }
                actor.position = actor.path.remove(0);
            }
            if !self.npc_in_zone(id, &act) {
                return;
            }
            self.mark_started(id);
        }
        self.run_timer(id);
    }

    fn npc_in_zone(&self, id: &CharacterId, act: &Activity) -> bool {
        let pos = self.actors[id].position;
        match &act.tuple.object_id {
            Some(o) => self.zones.get(o).is_some_and(|z| z.contains(&pos)),
            None => true,
        }
    }

    /// Counts one tick of the current activity and ends it when it runs out.
    fn run_timer(&mut self, id: &CharacterId) {
        if self.actors[id].activity.as_ref().is_some_and(|a| a.started_at.is_none()) {
            self.mark_started(id);
        }
        let act = self.actors.get_mut(id).and_then(|a| a.activity.as_mut()).expect("activity");
        act.remaining = act.remaining.saturating_sub(1);
        if let Some(k) = act.event {
            *self.progress.entry((k, id.clone())).or_default() += 1;
        }
        if act.remaining == 0 {
            self.end_activity(id, true);
            if *id != self.pc_id {
                self.choose_next(id, true);
            }
        }
    }

    fn mark_started(&mut self, id: &CharacterId) {
        let tick = self.tick;
        let actor = self.actors.get_mut(id).expect("actor");
        let act = actor.activity.as_mut().expect("activity");
        act.started_at = Some(tick);
        act.window = self.storyline.next_key_event;
        let payload = json!({
            "action": act.tuple.action,
            "object": act.tuple.object_id,
            "origin": act.origin,
            "event": act.event,
            "window": act.window,
            "position": actor.position,
        });
        let past = PastActivity {
            character_id: id.clone(),
            action: act.tuple.action.clone(),
            object_id: act.tuple.object_id.clone(),
            origin: act.origin,
            event: act.event,
        };
        self.log.push(tick, id.as_str(), RecordKind::ActivityStart, payload);
        self.storyline.ongoing.insert(id.clone(), past);
        if *id != self.pc_id && self.storyline.next_key_event.is_some() {
            self.request_plan(id);
        }
    }

    fn begin(&mut self, id: &CharacterId, act: Activity) {
        let actor = self.actors.get_mut(id).expect("actor");
        actor.path.clear();
        actor.activity = Some(act);
    }

    fn end_activity(&mut self, id: &CharacterId, completed: bool) {
        let Some(act) = self.actors.get_mut(id).and_then(|a| a.activity.take()) else {
            return;
        };
        self.storyline.ongoing.remove(id);
        if act.started_at.is_none() {
            return;
        }
        self.log.push(
            self.tick,
            id.as_str(),
            RecordKind::ActivityEnd,
            json!({
                "action": act.tuple.action,
                "object": act.tuple.object_id,
                "origin": act.origin,
                "event": act.event,
                "window": act.window,
                "completed": completed,
            }),
        );
        self.storyline.past_activities.push(PastActivity {
            character_id: id.clone(),
            action: act.tuple.action,
            object_id: act.tuple.object_id,
            origin: act.origin,
            event: act.event,
        });
        if completed {
            if let Some(k) = act.event {
                self.storyline.completed.insert((k, id.clone()));
                self.advance_bottleneck();
            }
        }
    }

    fn request_plan(&mut self, id: &CharacterId) {
        let npc = self.spec.character(id).expect("npc").clone();
        let tick = self.tick;
        let slot = if self.config.realtime_planning {
            let planner = Arc::clone(&self.planner);
            let spec = Arc::clone(&self.spec);
            let storyline = self.storyline.clone();
            PlanSlot::Running(std::thread::spawn(move || planner.plan_pair(&npc, &storyline, &spec, tick)))
        } else {
            PlanSlot::Ready(self.planner.plan_pair(&npc, &self.storyline, &self.spec, tick))
        };
        self.actors.get_mut(id).expect("npc").plan = Some(slot);
        self.log.push(tick, id.as_str(), RecordKind::PlanRequested, json!({ "window": self.storyline.next_key_event }));
    }

    /// The plan for `id` if it has arrived and its latency has elapsed.
    fn take_ready_plan(&mut self, id: &CharacterId) -> Option<PlanPair> {
        let actor = self.actors.get_mut(id).expect("npc");
        if let Some(PlanSlot::Running(h)) = &actor.plan {
            if !h.is_finished() {
                return None;
            }
            let Some(PlanSlot::Running(h)) = actor.plan.take() else { unreachable!() };
            match h.join() {
                Ok(p) => actor.plan = Some(PlanSlot::Ready(p)),
                Err(_) => return None,
            }
        }
        let Some(PlanSlot::Ready(p)) = &actor.plan else {
            return None;
        };
        if self.tick < ready_at(p, self.config.ms_per_tick) {
            return None;
        }
        match actor.plan.take() {
            Some(PlanSlot::Ready(p)) => Some(p),
            _ => None,
        }
    }

    /// Picks the next activity for an NPC. `boundary` is true when an activity just ended,
    /// in which case a plan that is not ready yet means an idle fallback.
    fn choose_next(&mut self, id: &CharacterId, boundary: bool) {
        let Some(k) = self.storyline.next_key_event else {
            self.actors.get_mut(id).expect("npc").plan = None;
            return;
        };
        let diverging = self.detect_divergence();
        let spec = Arc::clone(&self.spec);
        if !diverging {
            if let Some(t) = spec.key_events[k].activity_of(id).filter(|_| !self.storyline.is_completed(k, id)) {
                let done = self.progress.get(&(k, id.clone())).copied().unwrap_or(0);
                let act = Activity {
                    tuple: t.clone(),
                    origin: Origin::Authored,
                    event: Some(k),
                    window: Some(k),
                    remaining: self.config.activity_ticks.saturating_sub(done).max(1),
                    started_at: None,
                    paused: false,
                };
                self.assign(id, act);
                return;
            }
        }
        match self.take_ready_plan(id) {
            Some(pair) => {
                let followed = !diverging;
                // plan A naming an authored tuple outside the pending event is stale
                let stale = followed && pair.plan_a_event.is_some();
                let tuple = if stale { pair.plan_b.clone() } else { resolve(&pair, followed).clone() };
                let choice = if followed && !stale { "A" } else { "B" };
                self.log.push(
                    self.tick,
                    id.as_str(),
                    RecordKind::PlanResolved,
                    json!({
                        "pc_followed": followed,
                        "chosen": choice,
                        "plan_a": pair.plan_a,
                        "plan_b": pair.plan_b,
                        "planned_at": pair.planned_at,
                        "ready_at": ready_at(&pair, self.config.ms_per_tick),
                        "latency_ms": pair.request_latency_ms,
                    }),
                );
                let origin = if pair.fallback {
                    self.log_fallback(id, "provider_failure");
                    Origin::Fallback
                } else {
                    Origin::Planner
                };
                let act = Activity { tuple, origin, event: None, window: Some(k), remaining: self.config.activity_ticks, started_at: None, paused: false };
                self.assign(id, act);
            }
            None if boundary => {
                self.actors.get_mut(id).expect("npc").plan = None;
                self.log_fallback(id, "plan_not_ready");
                self.idle(id, k);
            }
            None => {
                if self.actors[id].plan.is_none() {
                    self.request_plan(id);
                }
            }
        }
    }

    fn log_fallback(&mut self, id: &CharacterId, reason: &str) {
        self.log.push(self.tick, id.as_str(), RecordKind::Fallback, json!({ "reason": reason, "action": crate::planner::IDLE_ACTION }));
    }

    fn idle(&mut self, id: &CharacterId, window: usize) {
        let act = Activity {
            tuple: idle_tuple(id),
            origin: Origin::Fallback,
            event: None,
            window: Some(window),
            remaining: self.config.activity_ticks,
            started_at: None,
            paused: false,
        };
        self.begin(id, act);
    }

    /// Gives `id` an activity and routes it to the object's zone.
    fn assign(&mut self, id: &CharacterId, act: Activity) {
        let pos = self.actors[id].position;
        let window = act.window.unwrap_or(0);
        let path = match &act.tuple.object_id {
            None => Some(Vec::new()),
            Some(o) => self.zones.get(o).and_then(|z| find_path(&self.walkable, pos, z)).map(|p| p[1..].to_vec()),
        };
        match path {
            Some(path) => {
                self.begin(id, act);
                self.actors.get_mut(id).expect("npc").path = path;
            }
            None => {
                self.log_fallback(id, "unreachable");
                self.idle(id, window);
            }
        }
    }

    /// Completes pending key events whose tuples are all done.
    pub fn advance_bottleneck(&mut self) {
        while let Some(k) = self.storyline.next_key_event {
            let ev = &self.spec.key_events[k];
            if !ev.activities.iter().all(|t| self.storyline.is_completed(k, &t.character_id)) {
                break;
            }
            self.completed_events = k + 1;
            let next = (k + 1 < self.spec.key_events.len()).then_some(k + 1);
            self.storyline.next_key_event = next;
            self.pc_divergent = false;
            self.pc_idle = 0;
            self.log.push(self.tick, WORLD, RecordKind::EventCompleted, json!({ "event": k }));
            self.refresh_glow();
            if let Some(n) = next {
                self.redirect_walkers(n);
            }
            if next.is_none() {
                self.status = Status::Ended;
                for a in self.actors.values_mut() {
                    a.plan = None;
                }
                self.log.push(self.tick, WORLD, RecordKind::Ended, json!({ "completed_events": self.completed_events }));
            }
        }
    }

    /// NPCs still walking to a non-authored activity switch to their part of event `k`.
    fn redirect_walkers(&mut self, k: usize) {
        let spec = Arc::clone(&self.spec);
        let walkers: Vec<CharacterId> = spec.key_events[k]
            .activities
            .iter()
            .map(|t| t.character_id.clone())
            .filter(|id| *id != self.pc_id)
            .filter(|id| self.actors.get(id).and_then(|a| a.activity.as_ref()).is_some_and(|a| a.started_at.is_none() && a.event.is_none()))
            .collect();
        for id in walkers {
            self.end_activity(&id, false);
            self.choose_next(&id, false);
        }
    }

    /// Objects of the pending event's tuples that nobody has started or done yet.
    fn refresh_glow(&mut self) {
        let mut glow = BTreeSet::new();
        if let Some(k) = self.storyline.next_key_event {
            for t in &self.spec.key_events[k].activities {
                let running = self.actors.get(&t.character_id).and_then(|a| a.activity.as_ref()).is_some_and(|a| a.event == Some(k) && a.started_at.is_some());
                if !running && !self.storyline.is_completed(k, &t.character_id) {
                    glow.extend(t.object_id.clone());
                }
            }
        }
        if glow != self.glow {
            self.glow = glow;
            self.log.push(self.tick, WORLD, RecordKind::Glow, json!({ "objects": self.glow }));
        }
    }

    /// True while the PC has an authored tuple in the pending event and has either started
    /// something else or stood idle under the glow for the threshold.
    pub fn detect_divergence(&self) -> bool {
        let Some(k) = self.storyline.next_key_event else {
            return false;
        };
        if self.spec.key_events[k].activity_of(&self.pc_id).is_none() || self.storyline.is_completed(k, &self.pc_id) {
            return false;
        }
        self.pc_divergent || (self.pc_idle >= self.config.idle_threshold_ticks && !self.glow.is_empty())
    }

    fn cue_pc(&mut self) {
        if self.status == Status::Ended || !self.detect_divergence() {
            return;
        }
        if self.last_voice.is_some_and(|t| self.tick - t < self.config.inner_voice_cooldown_ticks) {
            return;
        }
        let k = self.storyline.next_key_event.expect("pending");
        let tuple = self.spec.key_events[k].activity_of(&self.pc_id).expect("pc tuple").clone();
        let text = self.planner.inner_voice(&self.spec, &tuple);
        self.last_voice = Some(self.tick);
        self.log.push(self.tick, self.pc_id.as_str(), RecordKind::InnerVoice, json!({ "text": text, "event": k }));
        self.inner_voice_log.push(InnerVoice { tick: self.tick, text });
    }

    /// Sends a PC line to an NPC and logs both sides.
    pub fn send_chat(&mut self, npc_id: &CharacterId, text: &str) -> Result<ChatOutcome, RuntimeError> {
        if self.status == Status::Ended {
            return Err(RuntimeError::Ended);
        }
        let npc = self.spec.character(npc_id).filter(|c| !c.is_pc()).ok_or_else(|| RuntimeError::UnknownNpc(npc_id.clone()))?.clone();
        let pc_name = self.spec.pc().map(|c| c.name.clone()).unwrap_or_default();
        let lines: Vec<&ChatLine> = self.chat_log.iter().filter(|l| &l.npc_id == npc_id).collect();
        let history: Vec<Snippet> = lines[lines.len().saturating_sub(self.config.chat_history)..]
            .iter()
            .map(|l| Snippet {
                speaker: if l.speaker == self.pc_id { pc_name.clone() } else { npc.name.clone() },
                utterance: l.text.clone(),
            })
            .collect();
        let out = self.planner.chat(&self.spec, &self.storyline, &npc, text, &history);
        let tick = self.tick;
        self.log.push(tick, self.pc_id.as_str(), RecordKind::Chat, json!({ "to": npc_id, "text": out.pc_text, "withheld": out.pc_withheld }));
        self.log.push(
            tick,
            npc_id.as_str(),
            RecordKind::Chat,
            json!({ "to": self.pc_id, "text": out.reply, "withheld": out.reply_withheld, "intent": out.intent, "guided": out.guided }),
        );
        let pc_id = self.pc_id.clone();
        self.chat_log.push(ChatLine { tick, npc_id: npc_id.clone(), speaker: pc_id, text: out.pc_text.clone(), withheld: out.pc_withheld });
        self.chat_log.push(ChatLine { tick, npc_id: npc_id.clone(), speaker: npc_id.clone(), text: out.reply.clone(), withheld: out.reply_withheld });
        Ok(out)
    }

    /// Replays `trace` until the vignette ends or `max_ticks` have passed.
    pub fn run_trace(&mut self, trace: &ViewerTrace, max_ticks: u64) {
        while self.status == Status::Running && self.tick < max_ticks {
            let due: Vec<CommandKind> = trace.due(self.tick).map(|c| c.kind.clone()).collect();
            self.step(&due);
        }
    }
}

/// Tick from which a pair may be used.
pub fn ready_at(pair: &PlanPair, ms_per_tick: u64) -> u64 {
    pair.planned_at + pair.request_latency_ms.div_ceil(ms_per_tick.max(1))
}

/// Nearest reachable tile to `center`, ties broken by row then column.
fn anchor(reach: &Mask, center: Tile) -> Option<Tile> {
    reach.tiles().filter(|t| reach.get(*t)).min_by_key(|t| (t.manhattan(center), t.y, t.x))
}
