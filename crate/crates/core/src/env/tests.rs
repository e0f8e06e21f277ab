use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::catalog::Catalog;
use crate::geometry::{Direction, Mask, Rect, Size, Tile};
use crate::spec::*;

/// Distances by repeated relaxation until nothing changes. Targets may be entered even if blocked.
fn distance_oracle(m: &Mask, from: Tile, to: &BTreeSet<Tile>) -> Option<usize> {
    let (w, h) = (m.width() as i32, m.height() as i32);
    let mut d = vec![vec![usize::MAX; w as usize]; h as usize];
    d[from.y as usize][from.x as usize] = 0;
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let t = Tile::new(x, y);
                if t != from && !m.get(t) && !to.contains(&t) {
                    continue;
                }
                for n in t.neighbors() {
                    if n.x < 0 || n.y < 0 || n.x >= w || n.y >= h {
                        continue;
                    }
                    let dn = d[n.y as usize][n.x as usize];
                    // can only continue from n if n is the start or walkable and not a blocked target
                    let passable = n == from || m.get(n);
                    if dn != usize::MAX && passable && dn + 1 < d[y as usize][x as usize] {
                        d[y as usize][x as usize] = dn + 1;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    to.iter().map(|t| d[t.y as usize][t.x as usize]).filter(|v| *v != usize::MAX).min()
}

#[test]
fn find_path_matches_relaxation_oracle_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (w, h) = (rng.random_range(3..12), rng.random_range(3..12));
        let mut m = Mask::new(w, h, true);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                if rng.random_bool(0.3) {
                    m.set(Tile::new(x, y), false);
                }
            }
        }
        let from = Tile::new(rng.random_range(0..w as i32), rng.random_range(0..h as i32));
        m.set(from, true);
        let to: BTreeSet<Tile> =
            (0..rng.random_range(1..4)).map(|_| Tile::new(rng.random_range(0..w as i32), rng.random_range(0..h as i32))).collect();
        let got = find_path(&m, from, &to);
        assert_eq!(got.as_ref().map(|p| p.len() - 1), distance_oracle(&m, from, &to), "mask {:?}", m.to_rows());
        if let Some(p) = got {
            assert!(p.windows(2).all(|w| w[0].manhattan(w[1]) == 1));
            assert!(p.len() < 3 || p[1..p.len() - 1].iter().all(|t| m.get(*t)));
        }
    }
}

fn builder() -> EnvBuilder {
    EnvBuilder::offline(Arc::new(Catalog::builtin()))
}

fn residential(labels: &[(&str, &str)]) -> Environment {
    let c = Catalog::builtin();
    let labels: BTreeMap<RoomId, String> = labels.iter().map(|(k, v)| (RoomId::new(*k), v.to_string())).collect();
    c.layout("residential").unwrap().instantiate(&labels)
}

/// Zone reachability checked by the relaxation oracle, not the builder's BFS.
fn oracle_reachable(env: &Environment, o: &ObjectInstance) -> bool {
    let standable = env.standable_mask();
    let walkable = env.derive_walkable();
    let usable: BTreeSet<Tile> = o.zone.tiles.iter().copied().filter(|t| standable.get(*t)).collect();
    distance_oracle(&walkable, env.spawn().unwrap(), &usable).is_some()
}

fn assert_sound(env: &Environment) {
    for (i, a) in env.objects.iter().enumerate() {
        for b in &env.objects[i + 1..] {
            assert!(!a.rect().intersects(&b.rect()), "{} overlaps {}", a.id, b.id);
        }
        assert!(env.room(&a.room_id).unwrap().rect.contains_rect(&a.rect()), "{} leaves its room", a.id);
        assert!(oracle_reachable(env, a), "{} is unreachable", a.id);
    }
}

#[test]
fn every_bedroom_gets_a_bed() {
    let b = builder();
    let mut env = residential(&[]);
    let required = b.room_necessities(&env, &[]);
    let out = b.place_objects(&mut env, &required);
    assert!(out.unplaceable.is_empty(), "{:?}", out.unplaceable);
    for room in env.rooms.iter().filter(|r| r.label == "bedroom") {
        assert!(env.objects.iter().any(|o| o.asset_id == "bed" && o.room_id == room.id), "{}", room.id);
    }
    assert_sound(&env);
    assert!(validate_environment(&env, &[]).is_empty(), "{}", validate_environment(&env, &[]));
}

#[test]
fn event_objects_come_first_and_are_reachable() {
    let b = builder();
    let mut env = residential(&[("room_2", "living room"), ("room_6", "music room")]);
    let events = vec![
        RequiredObject::new("guitar", Some("music room"), ObjectKind::NecessaryEvent),
        RequiredObject::new("stove", Some("kitchen"), ObjectKind::NecessaryEvent),
    ];
    let mut required = events.clone();
    required.extend(b.room_necessities(&env, &events));
    let out = b.place_objects(&mut env, &required);
    assert!(out.unplaceable.is_empty(), "{:?}", out.unplaceable);
    assert_eq!(out.placed[0].as_str(), "guitar");
    assert_eq!(out.placed[1].as_str(), "stove");
    // the event stove covers the kitchen's own stove
    assert_eq!(env.objects.iter().filter(|o| o.asset_id == "stove").count(), 1);
    let guitar = env.object(&ObjectId::new("guitar")).unwrap();
    assert_eq!(env.room(&guitar.room_id).unwrap().label, "music room");
    assert_sound(&env);
}

#[test]
fn wall_objects_hug_a_wall_and_face_away() {
    let b = builder();
    let mut env = residential(&[]);
    b.place_objects(&mut env, &[RequiredObject::new("fridge", Some("kitchen"), ObjectKind::NecessaryEvent)]);
    let f = env.object(&ObjectId::new("fridge")).unwrap();
    let room = env.room(&f.room_id).unwrap().rect;
    let touching = [
        (f.position.y == room.y, Direction::South),
        (f.rect().bottom() == room.bottom(), Direction::North),
        (f.position.x == room.x, Direction::East),
        (f.rect().right() == room.right(), Direction::West),
    ];
    assert!(touching.iter().any(|(t, d)| *t && *d == f.facing), "{f:?}");
}

#[test]
fn chairs_end_up_next_to_the_table() {
    let b = builder();
    let mut env = residential(&[("room_2", "living room")]);
    let required = vec![
        RequiredObject::new("chair", Some("living room"), ObjectKind::NecessaryEvent),
        RequiredObject::new("chair", Some("living room"), ObjectKind::NecessaryEvent),
        RequiredObject::new("dining table", Some("living room"), ObjectKind::NecessaryRoom),
    ];
    let out = b.place_objects(&mut env, &required);
    assert!(out.unplaceable.is_empty());
    let table = env.objects.iter().find(|o| o.asset_id == "dining_table").unwrap();
    for chair in env.objects.iter().filter(|o| o.asset_id == "chair") {
        assert_eq!(chair.rect().gap(&table.rect()), 0, "{} too far from the table", chair.id);
    }
}

#[test]
fn oversized_object_is_unplaceable() {
    let b = builder();
    let mut env = Environment::empty("tiny", 5, 5);
    env.rooms.push(Room { id: RoomId::new("room_1"), label: "meeting room".into(), rect: Rect::new(1, 1, 2, 2) });
    env.refresh_walkable();
    let out = b.place_objects(&mut env, &[RequiredObject::new("meeting table", None, ObjectKind::NecessaryRoom)]);
    assert!(out.placed.is_empty());
    assert_eq!(out.unplaceable.len(), 1);
    assert_eq!(out.unplaceable[0].object, "meeting table");
    assert!(out.unplaceable[0].reasons[0].contains("smaller"), "{:?}", out.unplaceable);
}

#[test]
fn placement_is_deterministic() {
    let b = builder();
    let run = || {
        let mut env = residential(&[("room_2", "living room")]);
        let req = b.room_necessities(&env, &[]);
        b.place_objects(&mut env, &req);
        b.fill_decorative(&mut env, 0.5);
        env
    };
    assert_eq!(run(), run());
}

#[test]
fn decorative_fill_respects_density_and_paths() {
    let b = builder();
    let mut env = residential(&[]);
    let req = b.room_necessities(&env, &[]);
    b.place_objects(&mut env, &req);
    let before = env.clone();
    assert!(b.fill_decorative(&mut env, 0.0).is_empty());
    assert_eq!(env, before);

    let spawn = env.spawn().unwrap();
    let old_reach = reachable_from(&env.derive_walkable(), spawn);
    let added = b.fill_decorative(&mut env, 0.3);
    assert!(!added.is_empty());
    let bedroom = env.rooms.iter().find(|r| r.label == "bedroom").unwrap();
    let in_bedroom: Vec<_> = env
        .objects
        .iter()
        .filter(|o| o.kind == ObjectKind::Decorative && o.room_id == bedroom.id)
        .map(|o| o.asset_id.as_str())
        .collect();
    assert!(in_bedroom.contains(&"lamp") || in_bedroom.contains(&"rug"), "{in_bedroom:?}");
    assert_sound(&env);
    // nothing that was reachable is lost, except tiles now under decorations
    let new_reach = reachable_from(&env.derive_walkable(), spawn);
    for t in old_reach.tiles() {
        let covered = env.objects.iter().any(|o| o.kind == ObjectKind::Decorative && o.rect().contains(t));
        assert!(covered || new_reach.get(t), "{t} became unreachable");
    }
}

fn stove_env() -> Environment {
    let mut env = Environment::empty("test", 8, 6);
    env.rooms.push(Room { id: RoomId::new("room_1"), label: "kitchen".into(), rect: Rect::new(1, 1, 6, 4) });
    let floor = env.floor_mask();
    let zone = compute_trigger_tiles(Tile::new(1, 1), Size::new(1, 1), ZoneType::Directional, Direction::South, &floor, None).unwrap();
    env.objects.push(ObjectInstance {
        id: ObjectId::new("stove"),
        name: "stove".into(),
        room_id: RoomId::new("room_1"),
        position: Tile::new(1, 1),
        footprint: Size::new(1, 1),
        actions: vec!["cooking".into()],
        zone: TriggerZone { zone_type: ZoneType::Directional, tiles: zone },
        kind: ObjectKind::NecessaryEvent,
        facing: Direction::South,
        asset_id: "stove".into(),
    });
    env.spawn = Some(Tile::new(5, 3));
    env.refresh_walkable();
    env
}

#[test]
fn validate_environment_examples() {
    let env = stove_env();
    assert!(validate_environment(&env, &[]).is_empty(), "{}", validate_environment(&env, &[]));

    let mut overlap = env.clone();
    let mut dup = overlap.objects[0].clone();
    dup.id = ObjectId::new("stove_2");
    overlap.objects.push(dup);
    overlap.refresh_walkable();
    assert!(validate_environment(&overlap, &[]).has(ViolationCode::ObjectOverlap));

    // wall the stove's front tile off with boxes around it
    let mut walled = env.clone();
    for (i, p) in [(1, 3), (2, 2)].into_iter().enumerate() {
        let mut b = walled.objects[0].clone();
        b.id = ObjectId::new(format!("box_{i}"));
        b.position = Tile::new(p.0, p.1);
        b.zone = TriggerZone { zone_type: ZoneType::Around, tiles: BTreeSet::from([Tile::new(5, 4)]) };
        b.kind = ObjectKind::Decorative;
        walled.objects.push(b);
    }
    walled.refresh_walkable();
    assert!(oracle_reachable(&env, &env.objects[0]));
    assert!(!oracle_reachable(&walled, &walled.objects[0]));
    let report = validate_environment(&walled, &[]);
    assert_eq!(report.codes(), BTreeSet::from([ViolationCode::ZoneUnreachable]), "{report}");
    assert!(report.violations[0].message.contains("UNREACHABLE(stove)"));

    let ev = KeyEvent { index: 0, activities: vec![ActivityTuple::new("pc", "cooking", "oven")] };
    assert!(validate_environment(&env, &[ev]).has(ViolationCode::UnknownObjectRef));
}

#[test]
fn randomized_placement_instances_are_sound() {
    let b = builder();
    let c = Catalog::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let names: Vec<&str> = c.assets.iter().map(|a| a.name.as_str()).collect();
    for _ in 0..10 {
        let layout = &c.layouts[rng.random_range(0..c.layouts.len())];
        let mut env = layout.instantiate(&BTreeMap::new());
        let events: Vec<RequiredObject> = (0..rng.random_range(1..6))
            .map(|_| {
                let room = &env.rooms[rng.random_range(0..env.rooms.len())];
                RequiredObject::new(names[rng.random_range(0..names.len())], Some(room.label.as_str()), ObjectKind::NecessaryEvent)
            })
            .collect();
        let mut req = events.clone();
        req.extend(b.room_necessities(&env, &events));
        let out = b.place_objects(&mut env, &req);
        assert_eq!(out.placed.len() + out.unplaceable.len(), req.len());
        assert_sound(&env);
    }
}
