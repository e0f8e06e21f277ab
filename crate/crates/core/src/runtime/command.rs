use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Direction;
use crate::spec::{CharacterId, ObjectId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandKind {
    Move { direction: Direction },
    Interact { object_id: ObjectId },
    Chat { npc_id: CharacterId, text: String },
    /// Do nothing for `n` ticks.
    Wait { n: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewerCommand {
    pub at_tick: u64,
    #[serde(flatten)]
    pub kind: CommandKind,
}

impl ViewerCommand {
    pub fn new(at_tick: u64, kind: CommandKind) -> Self {
        Self { at_tick, kind }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{path}: command {index} at tick {tick} is not after tick {previous}")]
    NotIncreasing { path: String, index: usize, tick: u64, previous: u64 },
}

/// A scripted viewer: commands with strictly increasing ticks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViewerTrace {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Ticks to keep running after the last command.
    #[serde(default)]
    pub max_ticks: Option<u64>,
    pub commands: Vec<ViewerCommand>,
}

impl ViewerTrace {
    pub fn check(&self, path: &str) -> Result<(), TraceError> {
        for (i, w) in self.commands.windows(2).enumerate() {
            if w[1].at_tick <= w[0].at_tick {
                return Err(TraceError::NotIncreasing {
                    path: path.into(),
                    index: i + 1,
                    tick: w[1].at_tick,
                    previous: w[0].at_tick,
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self, TraceError> {
        let t: Self = serde_json::from_str(text).map_err(|source| TraceError::Parse { path: path.into(), source })?;
        t.check(path)?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io { path: p.clone(), source })?;
        Self::from_json(&text, &p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// Commands due at `tick`.
    pub fn due(&self, tick: u64) -> impl Iterator<Item = &ViewerCommand> {
        let i = self.commands.partition_point(|c| c.at_tick < tick);
        self.commands[i..].iter().take_while(move |c| c.at_tick == tick)
    }

    pub fn last_tick(&self) -> u64 {
        self.commands.last().map(|c| c.at_tick).unwrap_or(0)
    }
}
