//! Replaying a trace against a spec and writing the outputs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use vignette_core::llm::{Gateway, MockScript, RecordedCall, ScriptedMock};
use vignette_core::planner::{Planner, PlannerMode};
use vignette_core::runtime::{export_activity_table, ActivityTable, EventLog, RuntimeConfig, RuntimeError, Status, ViewerTrace, World};
use vignette_core::spec::{decode_spec, DecodeError, VignetteSpec};

use crate::check::{bottleneck_violations, completions, fallback_count};

/// Ticks allowed after the last command when the trace sets no limit.
pub const DEFAULT_SLACK_TICKS: u64 = 2_000;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Spec { path: String, source: DecodeError },
    #[error(transparent)]
    Trace(#[from] vignette_core::runtime::TraceError),
    #[error(transparent)]
    Script(#[from] vignette_core::llm::ScriptError),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Runtime { path: String, source: RuntimeError },
}

impl RunError {
    /// Process exit code: 2 for unusable inputs.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: PlannerMode,
    pub status: Status,
    pub ticks: u64,
    pub completed_events: Vec<usize>,
    pub key_events: usize,
    pub fallbacks: usize,
    pub violations: Vec<String>,
}

impl RunSummary {
    /// Ended with every key event completed in order.
    pub fn is_safe_completion(&self) -> bool {
        self.violations.is_empty() && self.status == Status::Ended && self.completed_events == (0..self.key_events).collect::<Vec<_>>()
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub log: EventLog,
    pub table: ActivityTable,
    pub calls: Vec<RecordedCall>,
}

pub fn load_spec(path: &Path) -> Result<VignetteSpec, RunError> {
    let p = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| RunError::Io { path: p.clone(), source })?;
    decode_spec(&bytes).map_err(|source| RunError::Spec { path: p, source })
}

/// A world driven by a scripted mock.
pub fn mock_world(spec: VignetteSpec, mode: PlannerMode, script: MockScript, config: RuntimeConfig, seed: u64) -> Result<(World, Arc<ScriptedMock>), RuntimeError> {
    let mock = Arc::new(ScriptedMock::new(script));
    let planner = Planner::new(Gateway::new(mock.clone()), mode, seed);
    Ok((World::new(spec, planner, config)?, mock))
}

/// Replays `trace` and collects the log, the activity table and every prompt sent.
pub fn run_trace(spec: VignetteSpec, trace: &ViewerTrace, mode: PlannerMode, script: MockScript, config: RuntimeConfig) -> Result<RunOutput, RuntimeError> {
    let (mut world, mock) = mock_world(spec, mode, script, config, trace.seed)?;
    let max = trace.max_ticks.unwrap_or(trace.last_tick() + DEFAULT_SLACK_TICKS);
    world.run_trace(trace, max);
    let log = world.log().clone();
    let spec = world.spec();
    let summary = RunSummary {
        mode,
        status: world.status(),
        ticks: world.tick(),
        completed_events: completions(&log),
        key_events: spec.key_events.len(),
        fallbacks: fallback_count(&log),
        violations: bottleneck_violations(&log, spec),
    };
    let table = export_activity_table(&log, spec, true);
    Ok(RunOutput { summary, log, table, calls: mock.calls() })
}

/// Writes `events.ndjson`, `activity_table.{csv,json}`, `prompts.ndjson` and `summary.json`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| RunError::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let prompts: String = out.calls.iter().map(|c| serde_json::to_string(c).expect("call serializes") + "\n").collect();
    let files = [
        ("events.ndjson", out.log.to_ndjson()),
        ("activity_table.csv", out.table.to_csv()),
        ("activity_table.json", out.table.to_json()),
        ("prompts.ndjson", prompts),
        ("summary.json", serde_json::to_string_pretty(&out.summary).expect("summary serializes") + "\n"),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
