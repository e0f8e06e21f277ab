use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schema::SchemaId;

/// Heading that opens the persona block inside planning and chat prompts.
pub const PERSONA_BLOCK_HEADER: &str = "## Persona";
/// Heading that opens the storyline block inside planning prompts.
pub const STORYLINE_BLOCK_HEADER: &str = "## Storyline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TemplateId {
    ExtractCharacters,
    SelectLayout,
    LabelRooms,
    ExtractEvents,
    Affordance,
    PlaceReasoning,
    PersonaSuggest,
    CharChat,
    PlanActivity,
    InnerVoice,
    GuideReply,
    DivergenceIntent,
    BlActivity,
}

impl TemplateId {
    pub const ALL: [TemplateId; 13] = [
        TemplateId::ExtractCharacters,
        TemplateId::SelectLayout,
        TemplateId::LabelRooms,
        TemplateId::ExtractEvents,
        TemplateId::Affordance,
        TemplateId::PlaceReasoning,
        TemplateId::PersonaSuggest,
        TemplateId::CharChat,
        TemplateId::PlanActivity,
        TemplateId::InnerVoice,
        TemplateId::GuideReply,
        TemplateId::DivergenceIntent,
        TemplateId::BlActivity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ExtractCharacters => "EXTRACT_CHARACTERS",
            TemplateId::SelectLayout => "SELECT_LAYOUT",
            TemplateId::LabelRooms => "LABEL_ROOMS",
            TemplateId::ExtractEvents => "EXTRACT_EVENTS",
            TemplateId::Affordance => "AFFORDANCE",
            TemplateId::PlaceReasoning => "PLACE_REASONING",
            TemplateId::PersonaSuggest => "PERSONA_SUGGEST",
            TemplateId::CharChat => "CHAR_CHAT",
            TemplateId::PlanActivity => "PLAN_ACTIVITY",
            TemplateId::InnerVoice => "INNER_VOICE",
            TemplateId::GuideReply => "GUIDE_REPLY",
            TemplateId::DivergenceIntent => "DIVERGENCE_INTENT",
            TemplateId::BlActivity => "BL_ACTIVITY",
        }
    }

    /// Extraction-style templates run at temperature 0.
    pub fn is_extraction(self) -> bool {
        matches!(
            self,
            TemplateId::ExtractCharacters
                | TemplateId::SelectLayout
                | TemplateId::LabelRooms
                | TemplateId::ExtractEvents
                | TemplateId::Affordance
                | TemplateId::PlaceReasoning
                | TemplateId::DivergenceIntent
        )
    }

    pub fn default_schema(self) -> SchemaId {
        match self {
            TemplateId::ExtractCharacters => SchemaId::Characters,
            TemplateId::SelectLayout => SchemaId::Layout,
            TemplateId::LabelRooms => SchemaId::RoomLabels,
            TemplateId::ExtractEvents => SchemaId::EventActions,
            TemplateId::Affordance => SchemaId::Affordance,
            TemplateId::PlaceReasoning => SchemaId::PlacementHints,
            TemplateId::PersonaSuggest => SchemaId::PersonaSuggestions,
            TemplateId::CharChat | TemplateId::GuideReply => SchemaId::Reply,
            TemplateId::PlanActivity => SchemaId::PlannedActivity,
            TemplateId::InnerVoice => SchemaId::Thought,
            TemplateId::DivergenceIntent => SchemaId::Intent,
            TemplateId::BlActivity => SchemaId::ObjectAction,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::ExtractCharacters => EXTRACT_CHARACTERS,
            TemplateId::SelectLayout => SELECT_LAYOUT,
            TemplateId::LabelRooms => LABEL_ROOMS,
            TemplateId::ExtractEvents => EXTRACT_EVENTS,
            TemplateId::Affordance => AFFORDANCE,
            TemplateId::PlaceReasoning => PLACE_REASONING,
            TemplateId::PersonaSuggest => PERSONA_SUGGEST,
            TemplateId::CharChat => CHAR_CHAT,
            TemplateId::PlanActivity => PLAN_ACTIVITY,
            TemplateId::InnerVoice => INNER_VOICE,
            TemplateId::GuideReply => GUIDE_REPLY,
            TemplateId::DivergenceIntent => DIVERGENCE_INTENT,
            TemplateId::BlActivity => BL_ACTIVITY,
        }
    }

    pub fn placeholders(self) -> BTreeSet<&'static str> {
        placeholders(self.text())
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| format!("unknown template {s}"))
    }
}

fn placeholders(text: &'static str) -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.insert(&after[..end]);
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template {template} needs variable {{{{{name}}}}}")]
    MissingVariable { template: TemplateId, name: String },
}

/// A template plus the variables that fill it. Construction checks coverage, so rendering is total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template_id: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub output_schema_id: SchemaId,
}

impl PromptRequest {
    pub fn new<K, V>(template_id: TemplateId, vars: impl IntoIterator<Item = (K, V)>) -> Result<Self, PromptError>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let variables: BTreeMap<String, String> = vars.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        if let Some(missing) = template_id.placeholders().into_iter().find(|p| !variables.contains_key(*p)) {
            return Err(PromptError::MissingVariable { template: template_id, name: missing.to_string() });
        }
        Ok(Self { template_id, variables, output_schema_id: template_id.default_schema() })
    }

    pub fn with_schema(mut self, schema: SchemaId) -> Self {
        self.output_schema_id = schema;
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.template_id.text().len() * 2);
        let mut rest = self.template_id.text();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").expect("templates are balanced");
            let name = &after[..end];
            out.push_str(self.variables.get(name).map(String::as_str).unwrap_or_default());
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        out
    }
}

const JSON_ONLY: &str = "Answer with a single JSON object and nothing else.";

macro_rules! tpl {
    ($name:ident, $body:expr) => {
        const $name: &str = concat!($body, "\n\n", "Answer with a single JSON object and nothing else.");
    };
}

tpl!(
    EXTRACT_CHARACTERS,
    "List the characters in this everyday story.\n\
The narrator (first-person pronoun such as \"I\" or \"me\") is the player character: role \"PC\", name \"me\".\n\
Every other named person is a non-player character: role \"NPC\".\n\
Only copy persona attributes (age, personality, social_role, mood, language_style) that the story states explicitly; \
leave anything else null. Do not guess.\n\n\
Story:\n{{story}}\n\n\
Schema: {\"characters\": [{\"name\": str, \"role\": \"PC\"|\"NPC\", \"age\": str|null, \"personality\": str|null, \
\"social_role\": str|null, \"mood\": str|null, \"language_style\": str|null}]}"
);

tpl!(
    SELECT_LAYOUT,
    "Pick the map layout whose urban-space tags best fit where this story happens.\n\n\
Layouts (id: tags):\n{{layouts}}\n\n\
Story:\n{{story}}\n\n\
Schema: {\"layout_id\": str}"
);

tpl!(
    LABEL_ROOMS,
    "Label each room of the {{layout_id}} layout with its function so the story can take place there.\n\n\
Rooms (id, size, default label):\n{{rooms}}\n\n\
Story:\n{{story}}\n\n\
Schema: {\"labels\": {room_id: label}}"
);

tpl!(
    EXTRACT_EVENTS,
    "You are scheduling the events of a story. Current step: {{phase}}.\n\
- objects: list the physical objects the characters' actions need, with the room each belongs in.\n\
- actions: list every action in the order the story mentions it, as (character, action, object); \
pick the most appropriate object from the object list, or null if none fits.\n\
- group: group the numbered actions that happen at the same time; groups must cover every action once \
and only merge neighbouring actions.\n\
- order: put the groups in chronological order.\n\n\
Story:\n{{story}}\n\n\
Characters:\n{{characters}}\n\n\
Objects:\n{{objects}}\n\n\
Numbered actions ({{action_count}}):\n{{actions}}\n\n\
Groups ({{group_count}}):\n{{groups}}\n\n\
Schemas by step: objects {\"objects\": [{\"name\": str, \"room\": str}]}; \
actions {\"actions\": [{\"character\": str, \"action\": str, \"object\": str|null}]}; \
group {\"groups\": [[int]]}; order {\"order\": [int]}"
);

tpl!(
    AFFORDANCE,
    "How do people typically interact with a \"{{object_name}}\"?\n\
Give the actions a character can perform with it and where the character must stand: \
on (on top, like sleeping on a bed), partial (on part of it, like the seat of a sofa), \
around (next to any side, like sitting around a table) or directional (at one side, like opening a fridge from the front).\n\n\
Schema: {\"actions\": [str], \"zone\": \"on\"|\"partial\"|\"around\"|\"directional\"}"
);

tpl!(
    PLACE_REASONING,
    "Objects are being placed in a {{room_label}}: {{objects}}.\n\
Which objects should stand close to which others (for example chairs next to a table), \
and which should stand against a wall (for example a fridge)?\n\n\
Schema: {\"near\": [{\"object\": str, \"anchor\": str, \"max_distance\": int}], \"wall\": [str]}"
);

tpl!(
    PERSONA_SUGGEST,
    "Suggest persona attributes for {{name}} based on how they talk.\n\
Current persona:\n{{persona}}\n\n\
Conversation samples:\n{{snippets}}\n\n\
Only suggest values for these blank fields: {{blank_fields}}.\n\n\
Schema: {\"suggestions\": {field: str}}"
);

tpl!(
    CHAR_CHAT,
    "You are {{name}}, a character in an interactive story. Stay in character.\n\n\
{{persona_block}}\n\n\
Example lines:\n{{snippets}}\n\n\
{{context}}\n\n\
Conversation so far:\n{{history}}\n\n\
{{speaker}} says: \"{{message}}\"\n\n\
Schema: {\"reply\": str}"
);

tpl!(
    PLAN_ACTIVITY,
    "Plan the next activity for {{npc_name}} in an interactive story.\n\n\
{{persona_block}}\n\n\
{{storyline_block}}\n\n\
Situation: {{future}}\n\n\
Choose one object and one of its actions.\n\
Objects (id: name: actions):\n{{objects}}\n\n\
Schema: {\"action\": str, \"object_id\": str}"
);

tpl!(
    INNER_VOICE,
    "{{pc_name}} should be {{action}} at the {{object}} but is doing something else.\n\
Write one short, cheerful first-person thought that nudges them toward it.\n\n\
Schema: {\"thought\": str}"
);

tpl!(
    GUIDE_REPLY,
    "You are {{npc_name}}. Stay in character.\n\n\
{{persona_block}}\n\n\
The player character just said: \"{{message}}\"\n\
They are trying to skip or derail the next thing that happens in the story: {{next_event}}.\n\
Do not agree. Reply briefly in your own voice and suggest doing it together.\n\n\
Schema: {\"reply\": str}"
);

tpl!(
    DIVERGENCE_INTENT,
    "The next story event is: {{next_event}}.\n\
Classify the player's message. follow: goes along with the event. small_talk: unrelated chat. \
derail: wants to skip, avoid or abandon the event.\n\n\
Message: \"{{message}}\"\n\n\
Schema: {\"intent\": \"follow\"|\"small_talk\"|\"derail\"}"
);

tpl!(
    BL_ACTIVITY,
    "{{npc_name}} is at the {{object_name}}. Pick what they do with it from: {{actions}}.\n\n\
Schema: {\"action\": str}"
);

/// Appended to the prompt of a re-ask after the previous reply failed its schema.
pub fn repair_instruction(error: &str) -> String {
    format!("\n\nYour previous answer was rejected: {error}. {JSON_ONLY}")
}

/// The persona block shared by chat, guidance and planning prompts. Blank fields say so explicitly.
pub fn persona_block(c: &crate::spec::Character) -> String {
    let mut out = format!("{PERSONA_BLOCK_HEADER}\nName: {}\n", c.name);
    for (field, label) in crate::spec::PERSONA_FIELDS.iter().zip(["Age", "Personality", "Social role", "Mood", "Language style"]) {
        let value = c.persona_field(field).and_then(|v| v.as_deref()).map(str::trim).filter(|v| !v.is_empty());
        out.push_str(&format!("{label}: {}\n", value.unwrap_or("(not specified)")));
    }
    out.pop();
    out
}

/// Conversation samples as `speaker: utterance` lines.
pub fn snippet_lines(snippets: &[crate::spec::Snippet]) -> String {
    if snippets.is_empty() {
        return "(none)".into();
    }
    snippets.iter().map(|s| format!("{}: {}", s.speaker, s.utterance)).collect::<Vec<_>>().join("\n")
}
