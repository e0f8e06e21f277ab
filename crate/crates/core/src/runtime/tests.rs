use std::collections::BTreeSet;
use std::sync::Arc;

use super::*;
use crate::env::find_path;
use crate::geometry::{Direction, Tile};
use crate::llm::{Gateway, MockScript, ScriptedMock};
use crate::planner::{Origin, Planner, PlannerMode};
use crate::spec::{decode_spec, CharacterId, ObjectId, VignetteSpec};

fn kelly() -> VignetteSpec {
    decode_spec(include_bytes!("../../../../fixtures/kelly/kelly.vignette.json")).unwrap()
}

fn world(seed: u64) -> World {
    let script = MockScript::from_json(include_str!("../../../../fixtures/kelly/mock.json")).unwrap();
    let planner = Planner::new(Gateway::new(Arc::new(ScriptedMock::new(script))), PlannerMode::Cd, seed);
    World::new(kelly(), planner, RuntimeConfig::default()).unwrap()
}

fn trace(name: &str) -> ViewerTrace {
    let path = format!("{}/../../fixtures/kelly/traces/{name}.json", env!("CARGO_MANIFEST_DIR"));
    ViewerTrace::load(std::path::Path::new(&path)).unwrap()
}

fn oid(s: &str) -> ObjectId {
    ObjectId::new(s)
}

fn direction(from: Tile, to: Tile) -> Direction {
    Direction::ALL.into_iter().find(|d| from.step(*d) == to).expect("adjacent tiles")
}

/// Walks the PC into the trigger zone of `object`, one move per tick.
fn walk_to(w: &mut World, object: &str) {
    let zone: BTreeSet<Tile> = w.spec().object(&oid(object)).unwrap().zone.tiles.iter().copied().filter(|t| w.standable().get(*t)).collect();
    let pc = w.pc_id().clone();
    let path = find_path(w.standable(), w.position(&pc).unwrap(), &zone).expect("reachable zone");
    for pair in path.windows(2) {
        w.step(&[CommandKind::Move { direction: direction(pair[0], pair[1]) }]);
    }
    assert!(zone.contains(&w.position(&pc).unwrap()));
}

fn interact(w: &mut World, object: &str) {
    w.step(&[CommandKind::Interact { object_id: oid(object) }]);
}

#[test]
fn initial_glow_is_the_first_event_objects() {
    let w = world(1);
    assert_eq!(w.glow(), &BTreeSet::from([oid("stove")]));
    assert_eq!(w.tick(), 0);
    assert_eq!(w.status(), Status::Running);
    assert_eq!(w.log().records()[0].kind, RecordKind::Init);
}

#[test]
fn same_spec_gives_the_same_initial_state() {
    let a = world(1);
    let b = world(1);
    assert_eq!(a.snapshot(), b.snapshot());
    assert_eq!(a.log(), b.log());
}

#[test]
fn moves_into_open_tiles_and_is_blocked_by_footprints() {
    let mut w = world(1);
    let pc = w.pc_id().clone();
    let start = w.position(&pc).unwrap();
    let open = Direction::ALL.into_iter().find(|d| w.standable().get(start.step(*d))).unwrap();
    w.step(&[CommandKind::Move { direction: open }]);
    assert_eq!(w.position(&pc), Some(start.step(open)));

    walk_to(&mut w, "stove");
    let at = w.position(&pc).unwrap();
    let stove = w.spec().object(&oid("stove")).unwrap().rect();
    let into = Direction::ALL.into_iter().find(|d| stove.contains(at.step(*d))).expect("zone touches the stove");
    let before = w.log().of_kind(RecordKind::Blocked).count();
    w.step(&[CommandKind::Move { direction: into }]);
    assert_eq!(w.position(&pc), Some(at));
    assert_eq!(w.log().of_kind(RecordKind::Blocked).count(), before + 1);
}

#[test]
fn interacting_from_outside_the_zone_is_not_in_zone() {
    let mut w = world(1);
    let pc = w.pc_id().clone();
    assert!(!w.spec().object(&oid("bed")).unwrap().zone.tiles.contains(&w.position(&pc).unwrap()));
    assert!(matches!(w.try_interact(&oid("bed")), Err(RuntimeError::NotInZone(_))));
    interact(&mut w, "bed");
    let r = w.log().of_kind(RecordKind::NotInZone).last().unwrap();
    assert_eq!(r.payload["object"], "bed");
    assert!(w.activity(&pc).is_none());
}

#[test]
fn a_non_glowing_object_starts_a_divergent_activity() {
    let mut w = world(1);
    let pc = w.pc_id().clone();
    walk_to(&mut w, "sofa");
    assert!(!w.glow().contains(&oid("sofa")));
    interact(&mut w, "sofa");
    let act = w.activity(&pc).unwrap();
    assert_eq!(act.origin, Origin::DivergentPc);
    assert_eq!(act.tuple.action, "watching TV");
    assert!(w.detect_divergence());
}

#[test]
fn cleaning_the_bookshelf_while_dinner_is_pending_diverges() {
    let mut w = world(1);
    let t = trace("follow_glow");
    while w.completed_events() < 1 {
        let due: Vec<CommandKind> = t.due(w.tick()).map(|c| c.kind.clone()).collect();
        w.step(&due);
    }
    assert_eq!(w.storyline().next_key_event, Some(1));
    assert!(!w.detect_divergence());
    walk_to(&mut w, "bookshelf");
    interact(&mut w, "bookshelf");
    let pc = w.pc_id().clone();
    assert_eq!(w.activity(&pc).unwrap().tuple.action, "cleaning the bookshelf");
    assert!(w.detect_divergence());
}

#[test]
fn a_later_event_cannot_be_done_first() {
    let mut w = world(1);
    let pc = w.pc_id().clone();
    walk_to(&mut w, "chair");
    assert!(!w.glow().contains(&oid("chair")));
    interact(&mut w, "chair");
    let act = w.activity(&pc).unwrap();
    assert_eq!(act.origin, Origin::DivergentPc);
    assert_eq!(act.event, None);
    for _ in 0..200 {
        w.step(&[]);
    }
    assert_eq!(w.storyline().next_key_event, Some(0));
    assert!(!w.storyline().is_completed(1, &pc));
}

#[test]
fn idling_under_the_glow_counts_as_diverging() {
    let mut w = world(1);
    let g = w.config().idle_threshold_ticks;
    for _ in 0..g - 1 {
        w.step(&[]);
    }
    assert!(!w.detect_divergence());
    w.step(&[]);
    w.step(&[]);
    assert!(w.detect_divergence());
}

#[test]
fn inner_voice_respects_the_cooldown() {
    let mut w = world(1);
    for _ in 0..700 {
        w.step(&[]);
    }
    let ticks: Vec<u64> = w.log().of_kind(RecordKind::InnerVoice).map(|r| r.tick).collect();
    assert!(ticks.len() >= 3, "{ticks:?}");
    let c = w.config().inner_voice_cooldown_ticks;
    assert!(ticks.windows(2).all(|p| p[1] - p[0] >= c), "{ticks:?}");
    assert!(w.snapshot().inner_voice_log.iter().all(|v| v.text == "Julie is waiting for me at the stove."));
}

#[test]
fn ended_world_ignores_commands() {
    let mut w = world(1);
    let t = trace("follow_glow");
    w.run_trace(&t, 4000);
    assert_eq!(w.status(), Status::Ended);
    let tick = w.tick();
    let len = w.log().len();
    w.step(&[CommandKind::Move { direction: Direction::North }]);
    assert_eq!(w.tick(), tick);
    assert_eq!(w.log().len(), len + 1);
    assert_eq!(w.log().records()[len].kind, RecordKind::Warning);
    assert!(matches!(w.try_interact(&oid("stove")), Err(RuntimeError::Ended)));
    assert!(matches!(w.send_chat(&CharacterId::new("julie"), "hi"), Err(RuntimeError::Ended)));
}

#[test]
fn npc_only_event_completes_without_the_pc() {
    let mut w = world(1);
    w.run_trace(&trace("follow_glow"), 4000);
    assert_eq!(w.completed_events(), 3);
    let last = w.log().of_kind(RecordKind::EventCompleted).last().unwrap();
    assert_eq!(last.payload["event"], 2);
    let pc = w.pc_id().as_str().to_string();
    let last_pc_start = w.log().of_kind(RecordKind::ActivityStart).filter(|r| r.actor == pc).last().unwrap();
    assert_eq!(last_pc_start.payload["event"], 1);
}

#[test]
fn following_the_story_exports_the_key_events() {
    let mut w = world(1);
    w.run_trace(&trace("follow_glow"), 4000);
    let spec = w.spec().clone();
    let table = export_activity_table(w.log(), &spec, true);
    let pc = w.pc_id().clone();
    assert!(table.rows.iter().filter(|r| r.kind == RowKind::Divergent).all(|r| !r.cells.contains_key(&pc)));
    let events: Vec<_> = table.rows.iter().filter(|r| r.kind == RowKind::KeyEvent).collect();
    assert_eq!(events.len(), spec.key_events.len());
    for (row, ev) in events.iter().zip(&spec.key_events) {
        for t in &ev.activities {
            let cells = &row.cells[&t.character_id];
            assert_eq!(cells.len(), 1);
            assert_eq!(cells[0].action, t.action);
            assert_eq!(cells[0].object.as_deref(), t.object_id.as_ref().map(|o| o.as_str()));
            assert!(!cells[0].generated);
        }
        let authored: BTreeSet<_> = ev.activities.iter().map(|t| &t.character_id).collect();
        assert!(row.cells.iter().filter(|(id, _)| !authored.contains(id)).flat_map(|(_, c)| c).all(|c| c.origin != Origin::Authored));
    }
}
