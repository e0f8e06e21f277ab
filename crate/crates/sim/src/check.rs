//! Structural checks over an event log.

use vignette_core::runtime::{EventLog, RecordKind};
use vignette_core::spec::VignetteSpec;

/// Key events complete in authored order, each at most once; authored activities only start
/// while their own event is pending; every other activity starts inside the window it is
/// logged with, between two completions.
pub fn bottleneck_violations(log: &EventLog, spec: &VignetteSpec) -> Vec<String> {
    let mut out = Vec::new();
    let mut completed = 0usize;
    for r in log.records() {
        match r.kind {
            RecordKind::EventCompleted => {
                let k = r.payload["event"].as_u64().unwrap_or(u64::MAX) as usize;
                if k != completed {
                    out.push(format!("seq {}: event {k} completed while event {completed} was pending", r.seq));
                }
                completed = k + 1;
            }
            RecordKind::ActivityStart => {
                let window = r.payload["window"].as_u64().map(|w| w as usize);
                let pending = (completed < spec.key_events.len()).then_some(completed);
                if window != pending {
                    out.push(format!("seq {}: activity logged for window {window:?} started while {pending:?} was pending", r.seq));
                }
                if let Some(e) = r.payload["event"].as_u64() {
                    if Some(e as usize) != pending {
                        out.push(format!("seq {}: authored activity of event {e} started while {pending:?} was pending", r.seq));
                    }
                }
            }
            _ => {}
        }
    }
    let ended = log.of_kind(RecordKind::Ended).count();
    if ended > 1 || (ended == 1 && completed != spec.key_events.len()) {
        out.push(format!("ended after {completed} of {} events", spec.key_events.len()));
    }
    out
}

/// Completed key-event indices in log order.
pub fn completions(log: &EventLog) -> Vec<usize> {
    log.of_kind(RecordKind::EventCompleted).filter_map(|r| r.payload["event"].as_u64()).map(|e| e as usize).collect()
}

pub fn fallback_count(log: &EventLog) -> usize {
    log.of_kind(RecordKind::Fallback).count()
}
