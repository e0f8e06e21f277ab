use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Direction, Mask, Rect, Size, Tile};

pub const SPEC_VERSION: u32 = 1;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(CharacterId);
string_id!(ObjectId);
string_id!(RoomId);

/// The author-confirmed bundle: environment, characters and ordered key events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VignetteSpec {
    pub spec_version: u32,
    pub title: String,
    pub story_text: String,
    pub environment: Environment,
    pub characters: Vec<Character>,
    pub key_events: Vec<KeyEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub layout_id: String,
    pub grid_width: u32,
    pub grid_height: u32,
    pub rooms: Vec<Room>,
    /// Floor tiles in the wall gaps between rooms.
    pub doors: Vec<Tile>,
    /// Overrides the default spawn (center of the first room).
    pub spawn: Option<Tile>,
    pub objects: Vec<ObjectInstance>,
    pub walkable_mask: Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub label: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    NecessaryEvent,
    NecessaryRoom,
    Decorative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub name: String,
    pub room_id: RoomId,
    pub position: Tile,
    pub footprint: Size,
    pub actions: Vec<String>,
    pub zone: TriggerZone,
    pub kind: ObjectKind,
    pub facing: Direction,
    pub asset_id: String,
}

impl ObjectInstance {
    pub fn rect(&self) -> Rect {
        Rect::at(self.position, self.footprint)
    }

    /// Affordance lookup, case-insensitive.
    pub fn affords(&self, action: &str) -> bool {
        self.actions.iter().any(|a| a.eq_ignore_ascii_case(action.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneType {
    On,
    Partial,
    Around,
    Directional,
}

impl ZoneType {
    /// Zones a character stands on top of the object to use.
    pub fn is_seated(self) -> bool {
        matches!(self, ZoneType::On | ZoneType::Partial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerZone {
    pub zone_type: ZoneType,
    pub tiles: BTreeSet<Tile>,
}

impl TriggerZone {
    pub fn contains(&self, t: Tile) -> bool {
        self.tiles.contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "NPC")]
    Npc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub speaker: String,
    pub utterance: String,
}

/// Persona fields are `None` until filled; blank is a legitimate authored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub id: CharacterId,
    pub role: Role,
    pub name: String,
    pub age: Option<String>,
    pub personality: Option<String>,
    pub social_role: Option<String>,
    pub mood: Option<String>,
    pub language_style: Option<String>,
    pub conversation_snippets: Vec<Snippet>,
    pub sprite_id: String,
}

/// Persona attribute names, in field order.
pub const PERSONA_FIELDS: [&str; 5] = ["age", "personality", "social_role", "mood", "language_style"];

impl Character {
    pub fn new(id: impl Into<String>, role: Role, name: impl Into<String>) -> Self {
        Self {
            id: CharacterId::new(id),
            role,
            name: name.into(),
            age: None,
            personality: None,
            social_role: None,
            mood: None,
            language_style: None,
            conversation_snippets: Vec::new(),
            sprite_id: match role {
                Role::Pc => "sprite.pc.default".into(),
                Role::Npc => "sprite.npc.default".into(),
            },
        }
    }

    pub fn is_pc(&self) -> bool {
        self.role == Role::Pc
    }

    pub fn persona_field(&self, name: &str) -> Option<&Option<String>> {
        match name {
            "age" => Some(&self.age),
            "personality" => Some(&self.personality),
            "social_role" => Some(&self.social_role),
            "mood" => Some(&self.mood),
            "language_style" => Some(&self.language_style),
            _ => None,
        }
    }

    pub fn persona_field_mut(&mut self, name: &str) -> Option<&mut Option<String>> {
        match name {
            "age" => Some(&mut self.age),
            "personality" => Some(&mut self.personality),
            "social_role" => Some(&mut self.social_role),
            "mood" => Some(&mut self.mood),
            "language_style" => Some(&mut self.language_style),
            _ => None,
        }
    }

    pub fn blank_fields(&self) -> Vec<&'static str> {
        PERSONA_FIELDS
            .into_iter()
            .filter(|f| self.persona_field(f).is_some_and(|v| is_blank(v)))
            .collect()
    }
}

pub(crate) fn is_blank(v: &Option<String>) -> bool {
    v.as_deref().is_none_or(|s| s.trim().is_empty())
}

/// "(character, action, object)"; `object_id` is unset while the author still has to pick one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityTuple {
    pub character_id: CharacterId,
    pub action: String,
    pub object_id: Option<ObjectId>,
}

impl ActivityTuple {
    pub fn new(character: impl Into<String>, action: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            character_id: CharacterId::new(character),
            action: action.into(),
            object_id: Some(ObjectId::new(object)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub index: usize,
    pub activities: Vec<ActivityTuple>,
}

impl KeyEvent {
    pub fn activity_of(&self, character: &CharacterId) -> Option<&ActivityTuple> {
        self.activities.iter().find(|a| &a.character_id == character)
    }
}

impl VignetteSpec {
    pub fn pc(&self) -> Option<&Character> {
        self.characters.iter().find(|c| c.is_pc())
    }

    pub fn npcs(&self) -> impl Iterator<Item = &Character> {
        self.characters.iter().filter(|c| !c.is_pc())
    }

    pub fn character(&self, id: &CharacterId) -> Option<&Character> {
        self.characters.iter().find(|c| &c.id == id)
    }

    pub fn character_mut(&mut self, id: &CharacterId) -> Option<&mut Character> {
        self.characters.iter_mut().find(|c| &c.id == id)
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectInstance> {
        self.environment.object(id)
    }
}

impl Environment {
    pub fn object(&self, id: &ObjectId) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn room(&self, id: &RoomId) -> Option<&Room> {
        self.rooms.iter().find(|r| &r.id == id)
    }

    pub fn room_at(&self, t: Tile) -> Option<&Room> {
        self.rooms.iter().find(|r| r.rect.contains(t))
    }

    /// Room interiors plus doorways.
    pub fn floor_mask(&self) -> Mask {
        let mut m = Mask::new(self.grid_width, self.grid_height, false);
        for r in &self.rooms {
            m.fill_rect(&r.rect, true);
        }
        for d in &self.doors {
            m.set(*d, true);
        }
        m
    }

    /// Floor minus every object footprint.
    pub fn derive_walkable(&self) -> Mask {
        let mut m = self.floor_mask();
        for o in &self.objects {
            m.fill_rect(&o.rect(), false);
        }
        m
    }

    pub fn refresh_walkable(&mut self) {
        self.walkable_mask = self.derive_walkable();
    }

    /// Walkable tiles plus the seat tiles of on/partial objects, which a character may step onto.
    pub fn standable_mask(&self) -> Mask {
        let mut m = self.derive_walkable();
        for o in self.objects.iter().filter(|o| o.zone.zone_type.is_seated()) {
            for t in &o.zone.tiles {
                m.set(*t, true);
            }
        }
        m
    }

    pub fn default_spawn(&self) -> Option<Tile> {
        self.rooms.first().map(|r| r.rect.center())
    }

    pub fn spawn(&self) -> Option<Tile> {
        self.spawn.or_else(|| self.default_spawn())
    }

    pub fn empty(layout_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            layout_id: layout_id.into(),
            grid_width: width,
            grid_height: height,
            rooms: Vec::new(),
            doors: Vec::new(),
            spawn: None,
            objects: Vec::new(),
            walkable_mask: Mask::new(width, height, false),
        }
    }
}
