//! Scripted viewers. An agent looks at the world each tick and decides the PC's commands;
//! recording a run turns it into a replayable trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vignette_core::env::find_path;
use vignette_core::geometry::{Direction, Tile};
use vignette_core::runtime::{CommandKind, RecordKind, Status, ViewerCommand, ViewerTrace, World};
use vignette_core::spec::{CharacterId, ObjectId};

pub trait Agent {
    fn act(&mut self, world: &World) -> Vec<CommandKind>;
}

/// Runs `agent` against `world` and keeps what it did as a trace. Agents issue at most one
/// command per tick, so trace ticks are strictly increasing.
pub fn record(world: &mut World, agent: &mut dyn Agent, max_ticks: u64, description: &str) -> ViewerTrace {
    let seed = world.planner().seed();
    let mut trace = ViewerTrace { description: description.into(), seed, max_ticks: Some(max_ticks), commands: Vec::new() };
    while world.status() == Status::Running && world.tick() < max_ticks {
        let mut cmds = agent.act(world);
        cmds.truncate(1);
        for c in &cmds {
            trace.commands.push(ViewerCommand::new(world.tick(), c.clone()));
        }
        world.step(&cmds);
    }
    trace
}

/// Direction from `a` to the adjacent tile `b`.
pub fn direction(a: Tile, b: Tile) -> Direction {
    match (b.x - a.x, b.y - a.y) {
        (1, _) => Direction::East,
        (-1, _) => Direction::West,
        (_, 1) => Direction::South,
        _ => Direction::North,
    }
}

/// Next move toward a usable tile of `object`, `None` when already there or unreachable.
pub fn step_toward(world: &World, object: &ObjectId) -> Option<Direction> {
    let pos = world.position(world.pc_id())?;
    let zone = world.zone_tiles(object)?;
    if zone.contains(&pos) {
        return None;
    }
    // the PC may cross seat tiles, so path over everything it can stand on
    let path = find_path(world.standable(), pos, zone)?;
    path.get(1).map(|next| direction(pos, *next))
}

/// The PC's own glowing object, if it has an authored tuple waiting.
pub fn pc_target(world: &World) -> Option<ObjectId> {
    let k = world.storyline().next_key_event?;
    let t = world.spec().key_events[k].activity_of(world.pc_id())?;
    if world.storyline().is_completed(k, world.pc_id()) {
        return None;
    }
    t.object_id.clone()
}

fn pc_running_authored(world: &World) -> bool {
    world.activity(world.pc_id()).is_some_and(|a| a.event.is_some() && !a.paused)
}

/// Walks to whatever glows for the PC and interacts with it; otherwise waits.
#[derive(Debug, Default)]
pub struct FollowGlow;

impl Agent for FollowGlow {
    fn act(&mut self, world: &World) -> Vec<CommandKind> {
        if pc_running_authored(world) {
            return Vec::new();
        }
        let Some(target) = pc_target(world) else {
            return Vec::new();
        };
        match step_toward(world, &target) {
            Some(d) => vec![CommandKind::Move { direction: d }],
            None if world.zone_tiles(&target).is_some_and(|z| z.contains(&world.position(world.pc_id()).unwrap())) => {
                vec![CommandKind::Interact { object_id: target }]
            }
            None => Vec::new(),
        }
    }
}

/// A wandering viewer: random moves, interactions, chats and pauses, with phases of
/// following the glow so that runs also make progress.
#[derive(Debug)]
pub struct RandomViewer {
    rng: ChaCha8Rng,
    follow: u32,
    dwell: u32,
    wander_target: Option<ObjectId>,
    /// Chance per tick of switching to follow mode for a while.
    pub follow_bias: f64,
}

impl RandomViewer {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), follow: 0, dwell: 0, wander_target: None, follow_bias: 0.02 }
    }
}

const CHAT_LINES: &[&str] = &["Hi!", "What are you doing?", "Can I skip this?", "I want to skip dinner.", "Nice weather today."];

impl Agent for RandomViewer {
    fn act(&mut self, world: &World) -> Vec<CommandKind> {
        if self.follow > 0 {
            self.follow -= 1;
            return FollowGlow.act(world);
        }
        if self.dwell > 0 {
            self.dwell -= 1;
            return Vec::new();
        }
        if self.rng.random_bool(self.follow_bias) {
            self.follow = self.rng.random_range(40..200);
            return Vec::new();
        }
        let objects = &world.spec().environment.objects;
        let roll: f64 = self.rng.random();
        if roll < 0.02 {
            let npcs: Vec<CharacterId> = world.spec().npcs().map(|c| c.id.clone()).collect();
            if !npcs.is_empty() {
                let npc = npcs[self.rng.random_range(0..npcs.len())].clone();
                let text = CHAT_LINES[self.rng.random_range(0..CHAT_LINES.len())].to_string();
                return vec![CommandKind::Chat { npc_id: npc, text }];
            }
        }
        if roll < 0.04 {
            let o = &objects[self.rng.random_range(0..objects.len())];
            return vec![CommandKind::Interact { object_id: o.id.clone() }];
        }
        if roll < 0.30 {
            return Vec::new();
        }
        if self.wander_target.is_none() || self.rng.random_bool(0.01) {
            self.wander_target = Some(objects[self.rng.random_range(0..objects.len())].id.clone());
        }
        let target = self.wander_target.clone().expect("target");
        match step_toward(world, &target) {
            Some(d) if roll < 0.85 => vec![CommandKind::Move { direction: d }],
            None if world.zone_tiles(&target).is_some_and(|z| world.position(world.pc_id()).is_some_and(|p| z.contains(&p))) => {
                self.wander_target = None;
                self.dwell = self.rng.random_range(0..100);
                vec![CommandKind::Interact { object_id: target }]
            }
            _ => vec![CommandKind::Move { direction: Direction::ALL[self.rng.random_range(0..4)] }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Caption,
    ToStove,
    Cooking,
    Explore,
    Cleaning,
    ToChair,
    Done,
}

/// The Kelly walkthrough viewer: reads the caption, cooks with Julie and asks about
/// spice, wanders off to clean the bookshelf, tries to skip dinner, then comes back for it.
#[derive(Debug)]
pub struct KellyViewer {
    phase: Phase,
    chatted_spice: bool,
    asked_skip: bool,
    cleaning_since: Option<u64>,
    /// Ticks spent reading the caption before moving.
    pub caption_ticks: u64,
}

impl Default for KellyViewer {
    fn default() -> Self {
        Self { phase: Phase::Caption, chatted_spice: false, asked_skip: false, cleaning_since: None, caption_ticks: 40 }
    }
}

impl KellyViewer {
    fn go(world: &World, target: &str) -> Vec<CommandKind> {
        let id = ObjectId::new(target);
        match step_toward(world, &id) {
            Some(d) => vec![CommandKind::Move { direction: d }],
            None => vec![CommandKind::Interact { object_id: id }],
        }
    }
}

impl Agent for KellyViewer {
    fn act(&mut self, world: &World) -> Vec<CommandKind> {
        let pc = world.pc_id().clone();
        let doing = world.activity(&pc).map(|a| a.tuple.action.clone());
        match self.phase {
            Phase::Caption => {
                if world.tick() >= self.caption_ticks {
                    self.phase = Phase::ToStove;
                }
                Vec::new()
            }
            Phase::ToStove => {
                if doing.as_deref() == Some("cooking dinner") {
                    self.phase = Phase::Cooking;
                    return Vec::new();
                }
                Self::go(world, "stove")
            }
            Phase::Cooking => {
                if !self.chatted_spice && world.activity(&pc).is_some_and(|a| a.remaining < 60) {
                    self.chatted_spice = true;
                    return vec![CommandKind::Chat { npc_id: CharacterId::new("julie"), text: "How much spice should I add?".into() }];
                }
                if world.completed_events() >= 1 {
                    self.phase = Phase::Explore;
                }
                Vec::new()
            }
            Phase::Explore => {
                if doing.as_deref() == Some("cleaning the bookshelf") {
                    self.phase = Phase::Cleaning;
                    self.cleaning_since = Some(world.tick());
                    return Vec::new();
                }
                Self::go(world, "bookshelf")
            }
            Phase::Cleaning => {
                let voiced = world.log().of_kind(RecordKind::InnerVoice).next().is_some();
                if voiced && !self.asked_skip {
                    self.asked_skip = true;
                    return vec![CommandKind::Chat { npc_id: CharacterId::new("jack"), text: "I want to skip dinner.".into() }];
                }
                let both_busy = ["jack", "julie"].iter().all(|n| {
                    world.activity(&CharacterId::new(*n)).is_some_and(|a| a.started_at.is_some() && a.event.is_none())
                });
                let waited = self.cleaning_since.is_some_and(|t| world.tick() >= t + 60);
                if self.asked_skip && both_busy && waited {
                    self.phase = Phase::ToChair;
                }
                Vec::new()
            }
            Phase::ToChair => {
                if doing.as_deref() == Some("having dinner") {
                    self.phase = Phase::Done;
                    return Vec::new();
                }
                Self::go(world, "chair")
            }
            Phase::Done => Vec::new(),
        }
    }
}
