//! Controlled Divergence: per-NPC plans for both futures, inner voice and chat guidance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::object_lines;
use crate::llm::{
    persona_block, snippet_lines, Gateway, Intent, IntentOut, Moderation, ObjectActionOut, PlannedActivityOut, PromptRequest,
    ReplyOut, ThoughtOut, TemplateId, REFUSAL_LINE, STORYLINE_BLOCK_HEADER,
};
use crate::spec::{ActivityTuple, Character, CharacterId, KeyEvent, ObjectId, Snippet, VignetteSpec};

/// Action label of the idle fallback.
pub const IDLE_ACTION: &str = "idle";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerMode {
    /// Persona and storyline.
    Cd,
    /// Persona only.
    Po,
    /// Storyline only.
    So,
    /// Uniformly random object, then an action for it.
    Bl,
}

impl PlannerMode {
    pub const ALL: [PlannerMode; 4] = [PlannerMode::Cd, PlannerMode::Po, PlannerMode::So, PlannerMode::Bl];

    pub fn uses_persona(self) -> bool {
        matches!(self, PlannerMode::Cd | PlannerMode::Po)
    }

    pub fn uses_storyline(self) -> bool {
        matches!(self, PlannerMode::Cd | PlannerMode::So)
    }
}

impl fmt::Display for PlannerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerMode::Cd => "CD",
            PlannerMode::Po => "PO",
            PlannerMode::So => "SO",
            PlannerMode::Bl => "BL",
        })
    }
}

impl FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cd" => Ok(PlannerMode::Cd),
            "po" => Ok(PlannerMode::Po),
            "so" => Ok(PlannerMode::So),
            "bl" => Ok(PlannerMode::Bl),
            other => Err(format!("unknown planner mode {other:?} (expected cd, po, so or bl)")),
        }
    }
}

/// Where an activity came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// A key-event tuple.
    Authored,
    /// Chosen by the viewer outside the key events.
    DivergentPc,
    /// Generated by the planner.
    Planner,
    /// Idle because no usable plan was available.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PastActivity {
    pub character_id: CharacterId,
    pub action: String,
    pub object_id: Option<ObjectId>,
    pub origin: Origin,
    /// The key event the activity belonged to, for authored ones.
    pub event: Option<usize>,
}

/// What the planner knows about the story so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storyline {
    /// Append-only.
    pub past_activities: Vec<PastActivity>,
    pub ongoing: BTreeMap<CharacterId, PastActivity>,
    /// `None` once every key event is complete. Never decreases.
    pub next_key_event: Option<usize>,
    /// `(event, character)` pairs whose authored tuple ran to full duration.
    pub completed: BTreeSet<(usize, CharacterId)>,
}

impl Storyline {
    pub fn new(spec: &VignetteSpec) -> Self {
        Self { next_key_event: (!spec.key_events.is_empty()).then_some(0), ..Self::default() }
    }

    pub fn is_completed(&self, event: usize, who: &CharacterId) -> bool {
        self.completed.contains(&(event, who.clone()))
    }

    /// The authored tuple `who` should do next: its uncompleted tuple in the pending event,
    /// or, if it is doing that one right now, its tuple in the event after.
    pub fn next_authored<'s>(&self, spec: &'s VignetteSpec, who: &CharacterId) -> Option<(usize, &'s ActivityTuple)> {
        let k = self.next_key_event?;
        let current_event = self.ongoing.get(who).and_then(|a| a.event);
        for idx in k..spec.key_events.len().min(k + 2) {
            if let Some(t) = spec.key_events[idx].activity_of(who) {
                if !self.is_completed(idx, who) && current_event != Some(idx) {
                    return Some((idx, t));
                }
                if current_event == Some(idx) {
                    continue;
                }
            }
            if idx == k && current_event != Some(k) {
                return None;
            }
        }
        None
    }
}

fn describe(spec: &VignetteSpec, t: &ActivityTuple) -> String {
    let who = spec.character(&t.character_id).map(|c| c.name.as_str()).unwrap_or(t.character_id.as_str());
    match t.object_id.as_ref().and_then(|o| spec.object(o)) {
        Some(o) => format!("{who}: {} at the {} ({})", t.action, o.name, o.id),
        None => format!("{who}: {}", t.action),
    }
}

fn describe_past(spec: &VignetteSpec, a: &PastActivity) -> String {
    let t = ActivityTuple { character_id: a.character_id.clone(), action: a.action.clone(), object_id: a.object_id.clone() };
    let tag = a.event.map(|e| format!(" (key event E{e})")).unwrap_or_default();
    format!("- {}{tag}", describe(spec, &t))
}

/// One-line summary of a key event.
pub fn event_summary(spec: &VignetteSpec, ev: &KeyEvent) -> String {
    ev.activities.iter().map(|t| describe(spec, t)).collect::<Vec<_>>().join("; ")
}

/// Past, ongoing and next activities, as shown to the planner.
pub fn storyline_block(spec: &VignetteSpec, s: &Storyline) -> String {
    let mut out = format!("{STORYLINE_BLOCK_HEADER}\nPast activities:\n");
    let past: Vec<_> = s.past_activities.iter().rev().take(12).collect();
    if past.is_empty() {
        out.push_str("- (none yet)\n");
    }
    for a in past.into_iter().rev() {
        out.push_str(&describe_past(spec, a));
        out.push('\n');
    }
    out.push_str("Ongoing activities:\n");
    if s.ongoing.is_empty() {
        out.push_str("- (none)\n");
    }
    for a in s.ongoing.values() {
        out.push_str(&describe_past(spec, a));
        out.push('\n');
    }
    match s.next_key_event.and_then(|k| spec.key_events.get(k).map(|e| (k, e))) {
        Some((k, ev)) => {
            out.push_str(&format!("Next key event: E{k}\n"));
            for t in &ev.activities {
                out.push_str(&format!("- {}\n", describe(spec, t)));
            }
        }
        None => out.push_str("Next key event: none, the story is complete\n"),
    }
    out.pop();
    out
}

/// Next activities for one NPC under both futures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanPair {
    pub npc_id: CharacterId,
    /// Future where the PC performs its next key-event activity.
    pub plan_a: ActivityTuple,
    /// Future where the PC diverges.
    pub plan_b: ActivityTuple,
    /// Key event plan_a belongs to when it is the NPC's authored tuple.
    pub plan_a_event: Option<usize>,
    pub planned_at: u64,
    pub request_latency_ms: u64,
    /// The provider failed and both plans are idle.
    pub fallback: bool,
}

/// Picks plan A if the PC followed the key event, plan B otherwise.
pub fn resolve(pair: &PlanPair, pc_followed_key_event: bool) -> &ActivityTuple {
    if pc_followed_key_event {
        &pair.plan_a
    } else {
        &pair.plan_b
    }
}

pub fn idle_tuple(npc: &CharacterId) -> ActivityTuple {
    ActivityTuple { character_id: npc.clone(), action: IDLE_ACTION.into(), object_id: None }
}

/// Result of a chat turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatOutcome {
    /// What the viewer sees for their own line.
    pub pc_text: String,
    pub pc_withheld: bool,
    pub reply: String,
    pub reply_withheld: bool,
    pub intent: Option<Intent>,
    /// The reply came from the guidance template.
    pub guided: bool,
}

pub struct Planner {
    gateway: Gateway,
    mode: PlannerMode,
    seed: u64,
}

impl fmt::Debug for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Planner").field("mode", &self.mode).finish_non_exhaustive()
    }
}

struct Generated {
    tuple: Option<ActivityTuple>,
    latency_ms: u64,
}

impl Planner {
    pub fn new(gateway: Gateway, mode: PlannerMode, seed: u64) -> Self {
        Self { gateway, mode, seed }
    }

    pub fn mode(&self) -> PlannerMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Plans both futures for `npc`. Issued when the NPC's current activity begins.
    pub fn plan_pair(&self, npc: &Character, storyline: &Storyline, spec: &VignetteSpec, tick: u64) -> PlanPair {
        let mut rng = self.request_rng(&npc.id, tick);
        let authored = storyline.next_authored(spec, &npc.id);
        let a = match authored {
            Some((_, t)) => Generated { tuple: Some(t.clone()), latency_ms: 0 },
            None => self.generate(npc, storyline, spec, true, &mut rng),
        };
        let b = self.generate(npc, storyline, spec, false, &mut rng);
        let latency = a.latency_ms.max(b.latency_ms);
        match (a.tuple, b.tuple) {
            (Some(plan_a), Some(plan_b)) => PlanPair {
                npc_id: npc.id.clone(),
                plan_a,
                plan_b,
                plan_a_event: authored.map(|(e, _)| e),
                planned_at: tick,
                request_latency_ms: latency,
                fallback: false,
            },
            _ => {
                tracing::warn!(npc = %npc.id, "planning failed, idle fallback pair");
                PlanPair {
                    npc_id: npc.id.clone(),
                    plan_a: idle_tuple(&npc.id),
                    plan_b: idle_tuple(&npc.id),
                    plan_a_event: None,
                    planned_at: tick,
                    request_latency_ms: latency,
                    fallback: true,
                }
            }
        }
    }

    fn future_text(&self, spec: &VignetteSpec, storyline: &Storyline, follows: bool) -> String {
        let pc = spec.pc().map(|c| c.name.as_str()).unwrap_or("the player");
        if !self.mode.uses_storyline() {
            return if follows {
                format!("The player character {pc} goes along with what is happening.")
            } else {
                format!("The player character {pc} goes off and does something else.")
            };
        }
        let pc_next = spec.pc().and_then(|p| {
            let k = storyline.next_key_event?;
            spec.key_events[k].activity_of(&p.id).map(|t| describe(spec, t))
        });
        match (follows, pc_next) {
            (true, Some(next)) => format!("The player character goes along with the story and starts the next key event ({next})."),
            (false, Some(next)) => format!("The player character ignores the story for now and does something else instead of the next key event ({next})."),
            (true, None) => "The player character goes along with the story.".into(),
            (false, None) => "The player character wanders off and does something else.".into(),
        }
    }

    fn generate(&self, npc: &Character, storyline: &Storyline, spec: &VignetteSpec, follows: bool, rng: &mut ChaCha8Rng) -> Generated {
        let objects = &spec.environment.objects;
        if objects.is_empty() {
            return Generated { tuple: None, latency_ms: 0 };
        }
        if self.mode == PlannerMode::Bl {
            let obj = &objects[pick_uniform(rng, objects.len())];
            let req = PromptRequest::new(
                TemplateId::BlActivity,
                [("npc_name", npc.name.clone()), ("object_name", obj.name.clone()), ("actions", obj.actions.join("; "))],
            )
            .expect("template variables");
            let res = self.gateway.complete_checked(&req, |v| {
                let a = v.get("action").and_then(|a| a.as_str()).unwrap_or_default();
                if obj.affords(a) {
                    Ok(())
                } else {
                    Err(format!("\"{a}\" is not one of: {}", obj.actions.join(", ")))
                }
            });
            return match res {
                Ok(r) => Generated {
                    latency_ms: r.latency_ms,
                    tuple: r.value::<ObjectActionOut>().ok().map(|o| ActivityTuple {
                        character_id: npc.id.clone(),
                        action: canonical_action(obj, &o.action),
                        object_id: Some(obj.id.clone()),
                    }),
                },
                Err(_) => Generated { tuple: None, latency_ms: 0 },
            };
        }
        let persona = if self.mode.uses_persona() { persona_block(npc) } else { String::new() };
        let story = if self.mode.uses_storyline() { storyline_block(spec, storyline) } else { String::new() };
        let req = PromptRequest::new(
            TemplateId::PlanActivity,
            [
                ("npc_name", npc.name.clone()),
                ("persona_block", persona),
                ("storyline_block", story),
                ("future", self.future_text(spec, storyline, follows)),
                ("objects", object_lines(objects)),
            ],
        )
        .expect("template variables");
        let res = self.gateway.complete_checked(&req, |v| {
            let out: PlannedActivityOut = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
            let obj = spec.object(&ObjectId::new(out.object_id.trim())).ok_or_else(|| format!("unknown object_id {}", out.object_id))?;
            if obj.affords(&out.action) {
                Ok(())
            } else {
                Err(format!("{} does not afford \"{}\"; choose one of: {}", obj.id, out.action, obj.actions.join(", ")))
            }
        });
        match res {
            Ok(r) => Generated {
                latency_ms: r.latency_ms,
                tuple: r.value::<PlannedActivityOut>().ok().and_then(|o| {
                    let obj = spec.object(&ObjectId::new(o.object_id.trim()))?;
                    Some(ActivityTuple {
                        character_id: npc.id.clone(),
                        action: canonical_action(obj, &o.action),
                        object_id: Some(obj.id.clone()),
                    })
                }),
            },
            Err(e) => {
                tracing::warn!(error = %e, "plan request failed");
                Generated { tuple: None, latency_ms: 0 }
            }
        }
    }

    /// Each request draws from its own stream so results do not depend on request order.
    fn request_rng(&self, npc: &CharacterId, tick: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let h = npc.as_str().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        rng.set_stream(h ^ tick.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng
    }

    /// A first-person nudge toward the PC's next key activity.
    pub fn inner_voice(&self, spec: &VignetteSpec, tuple: &ActivityTuple) -> String {
        let pc = spec.character(&tuple.character_id).map(|c| c.name.clone()).unwrap_or_else(|| "me".into());
        let object = tuple.object_id.as_ref().and_then(|o| spec.object(o)).map(|o| o.name.clone()).unwrap_or_default();
        let fallback = format!("Maybe I should {} now.", tuple.action);
        let Ok(req) = PromptRequest::new(
            TemplateId::InnerVoice,
            [("pc_name", pc), ("action", tuple.action.clone()), ("object", object)],
        ) else {
            return fallback;
        };
        match self.gateway.complete(&req).map(|r| r.value::<ThoughtOut>()) {
            Ok(Ok(t)) if !t.thought.trim().is_empty() => {
                let (text, verdict) = self.gateway.screen(t.thought.trim());
                if verdict.allowed() {
                    text
                } else {
                    fallback
                }
            }
            _ => fallback,
        }
    }

    /// A chat turn with an NPC: derailing messages get guidance back to the next key event,
    /// anything else an ordinary in-character reply. Both directions are moderated.
    pub fn chat(
        &self,
        spec: &VignetteSpec,
        storyline: &Storyline,
        npc: &Character,
        message: &str,
        history: &[Snippet],
    ) -> ChatOutcome {
        let refuse = |pc_text: String, pc_withheld: bool, intent| ChatOutcome {
            pc_text,
            pc_withheld,
            reply: REFUSAL_LINE.into(),
            reply_withheld: true,
            intent,
            guided: false,
        };
        let (pc_text, verdict) = self.gateway.screen(message.trim());
        if verdict != Moderation::Allow {
            return refuse(pc_text, true, None);
        }
        let next = storyline.next_key_event.and_then(|k| spec.key_events.get(k));
        let next_text = next.map(|ev| event_summary(spec, ev)).unwrap_or_else(|| "nothing, the story is complete".into());
        let intent = if next.is_some() {
            PromptRequest::new(TemplateId::DivergenceIntent, [("next_event", next_text.clone()), ("message", pc_text.clone())])
                .ok()
                .and_then(|req| self.gateway.complete(&req).ok())
                .and_then(|r| r.value::<IntentOut>().ok())
                .map(|o| o.intent)
        } else {
            None
        };
        let guided = intent == Some(Intent::Derail);
        let req = if guided {
            PromptRequest::new(
                TemplateId::GuideReply,
                [
                    ("npc_name", npc.name.clone()),
                    ("persona_block", persona_block(npc)),
                    ("message", pc_text.clone()),
                    ("next_event", next_text),
                ],
            )
        } else {
            let pc_name = spec.pc().map(|c| c.name.clone()).unwrap_or_else(|| "me".into());
            let doing = storyline
                .ongoing
                .get(&npc.id)
                .map(|a| format!("You are currently {}.", a.action))
                .unwrap_or_else(|| "You are not doing anything in particular.".into());
            PromptRequest::new(
                TemplateId::CharChat,
                [
                    ("name", npc.name.clone()),
                    ("persona_block", persona_block(npc)),
                    ("snippets", snippet_lines(&npc.conversation_snippets)),
                    ("context", format!("Story: {}\n{doing}", spec.story_text)),
                    ("history", snippet_lines(history)),
                    ("speaker", pc_name),
                    ("message", pc_text.clone()),
                ],
            )
        }
        .expect("template variables");
        let reply = match self.gateway.complete(&req).map(|r| r.value::<ReplyOut>()) {
            Ok(Ok(r)) if !r.reply.trim().is_empty() => r.reply.trim().to_string(),
            _ => return refuse(pc_text, false, intent),
        };
        let (reply, verdict) = self.gateway.screen(&reply);
        ChatOutcome { pc_text, pc_withheld: false, reply, reply_withheld: verdict != Moderation::Allow, intent, guided }
    }
}

/// Uniform index in `0..n`.
pub fn pick_uniform(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

/// The object's own spelling of an action, matched case-insensitively.
fn canonical_action(obj: &crate::spec::ObjectInstance, action: &str) -> String {
    obj.actions.iter().find(|a| a.eq_ignore_ascii_case(action.trim())).cloned().unwrap_or_else(|| action.trim().to_string())
}
