use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Extractor;
use crate::llm::{persona_block, snippet_lines, Moderation, PersonaSuggestionsOut, PromptRequest, ReplyOut, TemplateId, REFUSAL_LINE};
use crate::spec::{Character, Snippet};

/// Speaker name used for the author's side of a rehearsal chat.
pub const AUTHOR_SPEAKER: &str = "me";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub withheld: bool,
}

impl Extractor {
    /// Suggestions for blank persona fields only, from the character's conversation samples.
    pub fn suggest_persona(&self, character: &Character) -> BTreeMap<String, String> {
        let blank = character.blank_fields();
        if blank.is_empty() || character.conversation_snippets.is_empty() {
            return BTreeMap::new();
        }
        let req = PromptRequest::new(
            TemplateId::PersonaSuggest,
            [
                ("name", character.name.clone()),
                ("persona", persona_block(character)),
                ("snippets", snippet_lines(&character.conversation_snippets)),
                ("blank_fields", blank.join(", ")),
            ],
        )
        .expect("template variables");
        let out: PersonaSuggestionsOut = match self.gateway.complete(&req).map(|r| r.value()) {
            Ok(Ok(v)) => v,
            _ => return BTreeMap::new(),
        };
        out.suggestions
            .into_iter()
            .map(|(k, v)| (k.trim().to_lowercase().replace(' ', "_"), v.trim().to_string()))
            .filter(|(k, v)| blank.contains(&k.as_str()) && !v.is_empty())
            .collect()
    }

    /// A reply in character to something the author says. Both sides are moderated.
    pub fn simulate_chat(&self, character: &Character, utterance: &str, history: &[Snippet]) -> ChatReply {
        if !self.gateway.moderate(utterance).allowed() {
            return ChatReply { text: REFUSAL_LINE.into(), withheld: true };
        }
        let req = PromptRequest::new(
            TemplateId::CharChat,
            [
                ("name", character.name.clone()),
                ("persona_block", persona_block(character)),
                ("snippets", snippet_lines(&character.conversation_snippets)),
                ("context", "The story's author is rehearsing a conversation with you.".to_string()),
                ("history", snippet_lines(history)),
                ("speaker", AUTHOR_SPEAKER.to_string()),
                ("message", utterance.trim().to_string()),
            ],
        )
        .expect("template variables");
        let text = match self.gateway.complete(&req).map(|r| r.value::<ReplyOut>()) {
            Ok(Ok(v)) => v.reply,
            _ => return ChatReply { text: REFUSAL_LINE.into(), withheld: true },
        };
        let (text, verdict) = self.gateway.screen(&text);
        ChatReply { text, withheld: verdict != Moderation::Allow }
    }
}

/// Writes an accepted suggestion. Fields that already have a value are left alone.
pub fn accept_suggestion(character: &mut Character, field: &str, value: &str) -> bool {
    match character.persona_field_mut(field) {
        Some(slot) if crate::spec::is_blank(slot) && !value.trim().is_empty() => {
            *slot = Some(value.trim().to_string());
            true
        }
        _ => false,
    }
}

/// Stores an (possibly edited) exchange as reference dialogue for the character.
pub fn record_exchange(character: &mut Character, utterance: &str, reply: &str) {
    character.conversation_snippets.push(Snippet { speaker: AUTHOR_SPEAKER.into(), utterance: utterance.trim().into() });
    character.conversation_snippets.push(Snippet { speaker: character.name.clone(), utterance: reply.trim().into() });
}
