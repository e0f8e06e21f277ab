//! Random runnable specs for batch simulation.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vignette_core::catalog::Catalog;
use vignette_core::env::EnvBuilder;
use vignette_core::runtime::runnable_report;
use vignette_core::spec::{ActivityTuple, Character, KeyEvent, ObjectKind, Role, Snippet, VignetteSpec, SPEC_VERSION};

const NAMES: [&str; 6] = ["Julie", "Jack", "Mina", "Omar", "Rosa", "Theo"];
const PERSONALITIES: [&str; 5] = ["cheerful", "grumpy", "shy", "supportive", "curious"];
const ATTEMPTS: usize = 64;

/// A random spec that passes [`runnable_report`], reproducible from `seed`.
///
/// Panics if no runnable spec turns up within a bounded number of attempts,
/// which only happens with a broken catalog.
pub fn generate_spec(seed: u64) -> VignetteSpec {
    let catalog = Arc::new(Catalog::builtin());
    let builder = EnvBuilder::offline(catalog.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        if let Some(spec) = attempt(&builder, &catalog, &mut rng, seed) {
            if runnable_report(&spec).is_empty() {
                return spec;
            }
        }
    }
    panic!("no runnable spec for seed {seed}");
}

fn attempt(builder: &EnvBuilder, catalog: &Catalog, rng: &mut ChaCha8Rng, seed: u64) -> Option<VignetteSpec> {
    let layout = &catalog.layouts[rng.random_range(0..catalog.layouts.len())];
    let mut env = layout.instantiate(&BTreeMap::new());

    let mut characters = vec![Character::new("pc", Role::Pc, "me")];
    let npc_count = rng.random_range(1..=2);
    for i in 0..npc_count {
        let mut c = Character::new(format!("npc_{}", i + 1), Role::Npc, NAMES[rng.random_range(0..NAMES.len())]);
        c.name = format!("{} {}", c.name, i + 1);
        c.personality = Some(PERSONALITIES[rng.random_range(0..PERSONALITIES.len())].to_string());
        c.conversation_snippets.push(Snippet { speaker: c.name.clone(), utterance: "Hey, how was your day?".into() });
        characters.push(c);
    }

    let usable: Vec<_> = catalog.assets.iter().filter(|a| !a.actions.is_empty()).collect();
    let event_count = rng.random_range(2..=4);
    let mut key_events = Vec::new();
    for index in 0..event_count {
        let mut activities = Vec::new();
        for c in &characters {
            let take = if c.is_pc() { rng.random_bool(0.75) } else { rng.random_bool(0.6) };
            if !take {
                continue;
            }
            let asset = usable[rng.random_range(0..usable.len())];
            let room = &env.rooms[rng.random_range(0..env.rooms.len())];
            let room_id = room.id.as_str().to_string();
            let Ok(id) = builder.add_object(&mut env, &asset.name, Some(&room_id)) else { continue };
            if let Some(o) = env.objects.iter_mut().find(|o| o.id == id) {
                o.kind = ObjectKind::NecessaryEvent;
            }
            let action = &asset.actions[rng.random_range(0..asset.actions.len())];
            activities.push(ActivityTuple::new(c.id.as_str(), action.as_str(), id.as_str()));
        }
        if activities.is_empty() {
            return None;
        }
        key_events.push(KeyEvent { index, activities });
    }

    let needed = builder.room_necessities(&env, &[]);
    builder.place_objects(&mut env, &needed);
    builder.fill_decorative(&mut env, 0.3);

    Some(VignetteSpec {
        spec_version: SPEC_VERSION,
        title: format!("generated {seed}"),
        story_text: format!("A generated story with {event_count} key events."),
        environment: env,
        characters,
        key_events,
    })
}
