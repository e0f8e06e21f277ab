//! Story → vignette elements, in author-confirmed stages.

mod characters;
mod events;
mod persona;
mod session;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use characters::*;
pub use events::*;
pub use persona::*;
pub use session::*;

use crate::catalog::Catalog;
use crate::env::EnvBuilder;
use crate::llm::{Gateway, GatewayError, TemplateId};
use crate::spec::{Character, SpecLimits, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub max_story_chars: usize,
    /// Decorative density handed to the environment builder.
    pub decor_density: f64,
    pub limits: SpecLimits,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { max_story_chars: 2000, decor_density: 0.3, limits: SpecLimits::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagCode {
    /// An action has no plausible object; the author has to pick one.
    NeedsObject,
    /// Something the extractor will not guess, e.g. who "we" refers to.
    NeedsReview,
    /// The simultaneity grouping was not a contiguous partition; singletons were used.
    GroupingRejected,
    /// The event order was not a permutation; story order was kept.
    OrderRejected,
    /// The layout answer was not in the catalog; residential was used.
    LayoutFallback,
    Unplaceable,
    /// A stage's text-generation call failed; its output is empty.
    ExtractionFailed,
}

/// A note for the author attached to a draft.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionFlag {
    pub code: FlagCode,
    pub path: String,
    pub message: String,
}

impl ExtractionFlag {
    pub fn new(code: FlagCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code, path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("story is empty")]
    EmptyStory,
    #[error("story has {len} characters, at most {max} are supported")]
    StoryTooLong { len: usize, max: usize },
    #[error("story is not told in the first person; the narrator becomes the player character")]
    NotFirstPerson,
    #[error("CAP_EXCEEDED: {} characters detected, at most {max} are supported", characters.len())]
    CapExceeded { characters: Vec<Character>, max: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{template} gave no usable answer: {message}")]
    Schema { template: TemplateId, message: String },
    #[error("operation needs stage {expected} but the draft is at {actual}")]
    StageViolation { expected: Stage, actual: Stage },
    #[error("unknown layout {0}")]
    UnknownLayout(String),
    #[error("draft is invalid:\n{0}")]
    Invalid(ValidationReport),
}

/// Runs the extraction stages against one gateway and catalog.
pub struct Extractor {
    gateway: Gateway,
    builder: EnvBuilder,
    config: ExtractConfig,
}

impl std::fmt::Debug for Extractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Extractor").field("gateway", &self.gateway).field("config", &self.config).finish()
    }
}

impl Extractor {
    pub fn new(gateway: Gateway, catalog: Arc<Catalog>) -> Self {
        Self::with_config(gateway, catalog, ExtractConfig::default())
    }

    pub fn with_config(gateway: Gateway, catalog: Arc<Catalog>, config: ExtractConfig) -> Self {
        let builder = EnvBuilder::new(catalog, Some(gateway.clone()));
        Self { gateway, builder, config }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn builder(&self) -> &EnvBuilder {
        &self.builder
    }

    pub fn catalog(&self) -> &Catalog {
        self.builder.catalog()
    }

    pub fn config(&self) -> &ExtractConfig {
        &self.config
    }

    fn check_story(&self, story: &str) -> Result<(), ExtractError> {
        if story.trim().is_empty() {
            return Err(ExtractError::EmptyStory);
        }
        let len = story.chars().count();
        if len > self.config.max_story_chars {
            return Err(ExtractError::StoryTooLong { len, max: self.config.max_story_chars });
        }
        Ok(())
    }
}

/// Whole-word, case-insensitive test for any of `words` in `text`.
pub(crate) fn mentions_any(text: &str, words: &[&str]) -> bool {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.trim_matches('\'').to_lowercase())
        .any(|w| words.contains(&w.as_str()))
}

#[cfg(test)]
mod tests;
