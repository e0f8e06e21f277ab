use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::catalog::{normalize_name, AssetDef, Catalog};
use crate::geometry::Size;
use crate::llm::{AffordanceOut, Gateway, PromptRequest, TemplateId};
use crate::spec::ZoneType;

/// What a character can do with an object and where it has to stand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affordance {
    pub actions: Vec<String>,
    pub zone_type: ZoneType,
    pub needs_facing: bool,
}

impl Affordance {
    fn of(asset: &AssetDef) -> Self {
        Self {
            actions: asset.actions.clone(),
            zone_type: asset.zone,
            needs_facing: asset.zone == ZoneType::Directional,
        }
    }
}

/// Builds environments: affordances, placement, decoration and checks.
///
/// Catalog assets are used directly. Names the catalog does not know are
/// resolved once through the AFFORDANCE template and cached.
pub struct EnvBuilder {
    catalog: Arc<Catalog>,
    gateway: Option<Gateway>,
    cache: Mutex<BTreeMap<String, AssetDef>>,
}

impl std::fmt::Debug for EnvBuilder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnvBuilder").field("gateway", &self.gateway).finish_non_exhaustive()
    }
}

impl EnvBuilder {
    pub fn new(catalog: Arc<Catalog>, gateway: Option<Gateway>) -> Self {
        Self { catalog, gateway, cache: Mutex::new(BTreeMap::new()) }
    }

    /// Catalog only, no text generation.
    pub fn offline(catalog: Arc<Catalog>) -> Self {
        Self::new(catalog, None)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn gateway(&self) -> Option<&Gateway> {
        self.gateway.as_ref()
    }

    pub fn assign_affordances(&self, object_name: &str) -> Affordance {
        Affordance::of(&self.asset_for(object_name))
    }

    /// The catalog asset for a name, or a 1x1 stand-in described by the affordance template.
    pub fn asset_for(&self, object_name: &str) -> AssetDef {
        if let Some(a) = self.catalog.find_asset(object_name) {
            return a.clone();
        }
        let key = normalize_name(object_name);
        if let Some(a) = self.cache.lock().unwrap().get(&key) {
            return a.clone();
        }
        let (actions, zone) = self.ask_affordance(&key).unwrap_or_else(|| (vec!["inspect".to_string()], ZoneType::Around));
        let asset = AssetDef {
            id: crate::slug(&key),
            name: key.clone(),
            aliases: Vec::new(),
            footprint: Size::new(1, 1),
            zone,
            actions,
            wall: false,
            near: Vec::new(),
            necessary_for: Vec::new(),
            decorative_for: Vec::new(),
            partial: None,
        };
        self.cache.lock().unwrap().entry(key).or_insert(asset).clone()
    }

    fn ask_affordance(&self, object_name: &str) -> Option<(Vec<String>, ZoneType)> {
        let gw = self.gateway.as_ref()?;
        let req = PromptRequest::new(TemplateId::Affordance, [("object_name", object_name.trim())]).ok()?;
        let out: AffordanceOut = match gw.complete(&req) {
            Ok(res) => res.value().ok()?,
            Err(e) => {
                tracing::warn!(error = %e, object = object_name, "affordance lookup failed");
                return None;
            }
        };
        let mut actions: Vec<String> = Vec::new();
        for a in out.actions {
            let a = a.trim().to_string();
            if !a.is_empty() && !actions.iter().any(|x| x.eq_ignore_ascii_case(&a)) {
                actions.push(a);
            }
        }
        (!actions.is_empty()).then_some((actions, out.zone))
    }
}
