//! Layout templates and the asset catalog.
//!
//! Both ship as JSON embedded in the crate (`data/layouts.json`,
//! `data/assets.json`) and can be replaced by files with the same format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mask, Rect, Size, Tile};
use crate::spec::{Environment, Room, RoomId, ZoneType};

const BUILTIN_LAYOUTS: &str = include_str!("../data/layouts.json");
const BUILTIN_ASSETS: &str = include_str!("../data/assets.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("reading catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRoom {
    pub id: RoomId,
    pub rect: Rect,
    pub default_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutTemplate {
    pub id: String,
    pub tags: Vec<String>,
    pub width: u32,
    pub height: u32,
    pub rooms: Vec<LayoutRoom>,
    pub doors: Vec<Tile>,
}

impl LayoutTemplate {
    /// An object-free environment with the given labels, falling back to each room's default.
    pub fn instantiate(&self, labels: &BTreeMap<RoomId, String>) -> Environment {
        let mut env = Environment::empty(&self.id, self.width, self.height);
        env.rooms = self
            .rooms
            .iter()
            .map(|r| Room {
                id: r.id.clone(),
                label: labels
                    .get(&r.id)
                    .filter(|l| !l.trim().is_empty())
                    .cloned()
                    .unwrap_or_else(|| r.default_label.clone()),
                rect: r.rect,
            })
            .collect();
        env.doors = self.doors.clone();
        env.refresh_walkable();
        env
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearHint {
    pub asset: String,
    pub max_distance: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDef {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub footprint: Size,
    pub zone: ZoneType,
    pub actions: Vec<String>,
    /// Must touch a room wall.
    #[serde(default)]
    pub wall: bool,
    #[serde(default)]
    pub near: Vec<NearHint>,
    /// Room labels that always get one of these.
    #[serde(default)]
    pub necessary_for: Vec<String>,
    /// Room labels this may decorate.
    #[serde(default)]
    pub decorative_for: Vec<String>,
    /// Seat sub-rectangle for `partial` zones, relative to the footprint's top-left.
    #[serde(default)]
    pub partial: Option<Rect>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    pub layouts: Vec<LayoutTemplate>,
    pub assets: Vec<AssetDef>,
}

#[derive(Deserialize)]
struct LayoutFile {
    layouts: Vec<LayoutTemplate>,
}

#[derive(Deserialize)]
struct AssetFile {
    assets: Vec<AssetDef>,
}

pub(crate) fn normalize_name(s: &str) -> String {
    s.trim().to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_LAYOUTS, BUILTIN_ASSETS).expect("builtin catalog is valid")
    }

    pub fn from_json(layouts: &str, assets: &str) -> Result<Self, CatalogError> {
        let layouts: LayoutFile = serde_json::from_str(layouts)?;
        let assets: AssetFile = serde_json::from_str(assets)?;
        let catalog = Self { layouts: layouts.layouts, assets: assets.assets };
        catalog.check()?;
        Ok(catalog)
    }

    pub fn load(layouts: &Path, assets: &Path) -> Result<Self, CatalogError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| CatalogError::Io { path: p.display().to_string(), source })
        };
        Self::from_json(&read(layouts)?, &read(assets)?)
    }

    fn check(&self) -> Result<(), CatalogError> {
        if self.layouts.is_empty() {
            return Err(CatalogError::Invalid("no layouts".into()));
        }
        for a in &self.assets {
            if a.actions.is_empty() {
                return Err(CatalogError::Invalid(format!("asset {} has no actions", a.id)));
            }
            if a.footprint.w == 0 || a.footprint.h == 0 {
                return Err(CatalogError::Invalid(format!("asset {} has an empty footprint", a.id)));
            }
        }
        Ok(())
    }

    pub fn layout(&self, id: &str) -> Option<&LayoutTemplate> {
        self.layouts.iter().find(|l| l.id == id)
    }

    pub fn asset(&self, id: &str) -> Option<&AssetDef> {
        self.assets.iter().find(|a| a.id == id)
    }

    /// Finds an asset by id, display name or alias; a trailing plural `s` is tolerated.
    pub fn find_asset(&self, name: &str) -> Option<&AssetDef> {
        let n = normalize_name(name);
        let matches = |cand: &str| {
            let c = normalize_name(cand);
            c == n || format!("{c}s") == n || format!("{c}es") == n
        };
        self.assets
            .iter()
            .find(|a| matches(&a.id) || matches(&a.name) || a.aliases.iter().any(|al| matches(al)))
    }

    pub fn necessary_for(&self, room_label: &str) -> Vec<&AssetDef> {
        let l = normalize_name(room_label);
        self.assets.iter().filter(|a| a.necessary_for.iter().any(|r| normalize_name(r) == l)).collect()
    }

    pub fn decorative_for(&self, room_label: &str) -> Vec<&AssetDef> {
        let l = normalize_name(room_label);
        self.assets.iter().filter(|a| a.decorative_for.iter().any(|r| normalize_name(r) == l)).collect()
    }

    /// Layout ids with their tags, as offered to the layout selector.
    pub fn layout_menu(&self) -> String {
        self.layouts.iter().map(|l| format!("{}: {}", l.id, l.tags.join(", "))).collect::<Vec<_>>().join("\n")
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Convenience for tests and tools: a bare floor mask for a layout.
pub fn layout_floor(layout: &LayoutTemplate) -> Mask {
    layout.instantiate(&BTreeMap::new()).floor_mask()
}
