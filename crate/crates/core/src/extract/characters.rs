use std::collections::{BTreeMap, BTreeSet};

use super::{mentions_any, ExtractError, ExtractionFlag, Extractor, FlagCode};
use crate::llm::{CharactersOut, LayoutOut, PromptRequest, RoomLabelsOut, TemplateId};
use crate::spec::{Character, Role, RoomId};

const FIRST_PERSON: &[&str] = &["i", "me", "my", "mine", "myself", "i'm", "i've", "i'd", "i'll"];
const PLURAL_FIRST_PERSON: &[&str] = &["we", "us", "our", "ours", "ourselves", "we're", "we've", "we'd", "we'll"];

pub const DEFAULT_LAYOUT: &str = "residential";

/// Keeps an attribute only if the story states it; the extractor never infers persona.
fn stated(story: &str, value: Option<String>) -> Option<String> {
    let v = value?.trim().to_string();
    (!v.is_empty() && story.to_lowercase().contains(&v.to_lowercase())).then_some(v)
}

impl Extractor {
    /// The narrator becomes the PC; other named people become NPCs with only stated attributes filled.
    pub fn extract_characters(&self, story: &str) -> Result<Vec<Character>, ExtractError> {
        self.check_story(story)?;
        if !mentions_any(story, FIRST_PERSON) && !mentions_any(story, PLURAL_FIRST_PERSON) {
            return Err(ExtractError::NotFirstPerson);
        }
        let req = PromptRequest::new(TemplateId::ExtractCharacters, [("story", story)]).expect("template variables");
        let res = self.gateway.complete(&req)?;
        let out: CharactersOut =
            res.value().map_err(|e| ExtractError::Schema { template: TemplateId::ExtractCharacters, message: e.0 })?;

        let mut pc: Option<Character> = None;
        let mut npcs: Vec<Character> = Vec::new();
        let mut ids: BTreeSet<String> = BTreeSet::from(["pc".to_string()]);
        for c in out.characters {
            let name = c.name.trim().to_string();
            let narrator = c.role == Role::Pc || mentions_any(&name, FIRST_PERSON);
            let mut ch = if narrator {
                if pc.is_some() {
                    continue;
                }
                Character::new("pc", Role::Pc, if name.is_empty() { "me".into() } else { name.clone() })
            } else {
                if npcs.iter().any(|n| n.name.eq_ignore_ascii_case(&name)) {
                    continue;
                }
                let base = crate::slug(&name);
                let base = if base.is_empty() { format!("npc_{}", npcs.len() + 1) } else { base };
                let mut id = base.clone();
                let mut k = 2;
                while !ids.insert(id.clone()) {
                    id = format!("{base}_{k}");
                    k += 1;
                }
                let mut ch = Character::new(id, Role::Npc, name.clone());
                ch.sprite_id = format!("sprite.npc.{}", npcs.len() + 1);
                ch
            };
            ch.age = stated(story, c.age);
            ch.personality = stated(story, c.personality);
            ch.social_role = stated(story, c.social_role);
            ch.mood = stated(story, c.mood);
            ch.language_style = stated(story, c.language_style);
            if narrator {
                pc = Some(ch);
            } else {
                npcs.push(ch);
            }
        }
        let mut all = vec![pc.unwrap_or_else(|| Character::new("pc", Role::Pc, "me"))];
        all.extend(npcs);
        if all.len() > self.config.limits.max_characters {
            return Err(ExtractError::CapExceeded { characters: all, max: self.config.limits.max_characters });
        }
        Ok(all)
    }

    /// Ambiguous plural pronouns are surfaced for review rather than resolved.
    pub fn pronoun_flags(&self, story: &str) -> Vec<ExtractionFlag> {
        if mentions_any(story, PLURAL_FIRST_PERSON) {
            vec![ExtractionFlag::new(
                FlagCode::NeedsReview,
                "story_text",
                "the story says \"we\"; check which characters take part in those events",
            )]
        } else {
            Vec::new()
        }
    }

    /// A catalog layout id for the story; an answer outside the catalog falls back to residential.
    pub fn select_layout(&self, story: &str) -> (String, Option<ExtractionFlag>) {
        let fallback = |why: String| {
            tracing::warn!(reason = %why, "layout selection fell back to {DEFAULT_LAYOUT}");
            (DEFAULT_LAYOUT.to_string(), Some(ExtractionFlag::new(FlagCode::LayoutFallback, "environment.layout_id", why)))
        };
        let req = PromptRequest::new(TemplateId::SelectLayout, [("layouts", self.catalog().layout_menu()), ("story", story.to_string())])
            .expect("template variables");
        let answer = match self.gateway.complete(&req).map(|r| r.value::<LayoutOut>()) {
            Ok(Ok(v)) => v.layout_id,
            Ok(Err(e)) => return fallback(format!("layout answer unusable: {e}")),
            Err(e) => return fallback(e.to_string()),
        };
        let id = answer.trim().to_lowercase();
        if self.catalog().layout(&id).is_some() {
            (id, None)
        } else {
            fallback(format!("layout \"{answer}\" is not in the catalog"))
        }
    }

    /// A label for every room of the layout; rooms the answer skips keep their default label.
    pub fn label_rooms(&self, layout_id: &str, story: &str) -> Result<BTreeMap<RoomId, String>, ExtractError> {
        let layout = self.catalog().layout(layout_id).ok_or_else(|| ExtractError::UnknownLayout(layout_id.to_string()))?;
        let rooms = layout
            .rooms
            .iter()
            .map(|r| format!("{} ({}x{}): {}", r.id, r.rect.w, r.rect.h, r.default_label))
            .collect::<Vec<_>>()
            .join("\n");
        let req = PromptRequest::new(
            TemplateId::LabelRooms,
            [("layout_id", layout_id.to_string()), ("rooms", rooms), ("story", story.to_string())],
        )
        .expect("template variables");
        let answered = match self.gateway.complete(&req).map(|r| r.value::<RoomLabelsOut>()) {
            Ok(Ok(v)) => v.labels,
            other => {
                tracing::warn!(result = ?other.err(), "room labelling failed, keeping defaults");
                BTreeMap::new()
            }
        };
        Ok(layout
            .rooms
            .iter()
            .map(|r| {
                let label = answered
                    .get(r.id.as_str())
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .unwrap_or_else(|| r.default_label.clone());
                (r.id.clone(), label)
            })
            .collect())
    }
}
