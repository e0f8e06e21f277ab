use std::collections::BTreeSet;

use super::pathing::reachable_from;
use super::zones::zone_reachable;
use crate::spec::{validate_environment_shape, Environment, KeyEvent, SpecLimits, ValidationReport, ViolationCode};

/// Geometric invariants plus the builder's guarantees: event objects exist and
/// every trigger zone is reachable from the spawn tile.
pub fn validate_environment(env: &Environment, key_events: &[KeyEvent]) -> ValidationReport {
    let mut r = validate_environment_shape(env, &SpecLimits { max_objects: usize::MAX, ..SpecLimits::default() });
    let ids: BTreeSet<_> = env.objects.iter().map(|o| &o.id).collect();
    for (i, ev) in key_events.iter().enumerate() {
        for (j, a) in ev.activities.iter().enumerate() {
            if let Some(o) = &a.object_id {
                if !ids.contains(o) {
                    r.push(
                        ViolationCode::UnknownObjectRef,
                        format!("key_events[{i}].activities[{j}].object_id"),
                        format!("event object {o} is missing from the environment"),
                    );
                }
            }
        }
    }
    let walkable = env.derive_walkable();
    let Some(spawn) = env.spawn().filter(|s| walkable.get(*s)) else {
        r.push(ViolationCode::SpawnBlocked, "environment.spawn", "spawn tile is missing or not walkable");
        return r;
    };
    let standable = env.standable_mask();
    let reach = reachable_from(&walkable, spawn);
    for (i, o) in env.objects.iter().enumerate() {
        if !o.zone.tiles.is_empty() && !zone_reachable(&o.zone, &walkable, &standable, &reach) {
            r.push(
                ViolationCode::ZoneUnreachable,
                format!("environment.objects[{i}].zone"),
                format!("UNREACHABLE({}): no trigger tile can be reached from the spawn", o.id),
            );
        }
    }
    r
}
