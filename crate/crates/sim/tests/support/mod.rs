#![allow(dead_code)]

use std::path::{Path, PathBuf};

use vignette_core::llm::MockScript;
use vignette_core::planner::{Planner, PlannerMode};
use vignette_core::runtime::{RuntimeConfig, ViewerTrace, World};
use vignette_core::llm::{Gateway, ScriptedMock};
use vignette_core::spec::{decode_spec, VignetteSpec};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn kelly_script() -> MockScript {
    MockScript::load(&fixtures().join("kelly/mock.json")).expect("kelly mock script")
}

pub fn kelly_spec() -> VignetteSpec {
    let bytes = std::fs::read(fixtures().join("kelly/kelly.vignette.json")).expect("kelly spec fixture");
    decode_spec(&bytes).expect("kelly spec decodes")
}

pub fn kelly_world(mode: PlannerMode, seed: u64) -> World {
    let planner = Planner::new(Gateway::new(std::sync::Arc::new(ScriptedMock::new(kelly_script()))), mode, seed);
    World::new(kelly_spec(), planner, RuntimeConfig::default()).expect("kelly spec is runnable")
}

pub fn kelly_trace(name: &str) -> ViewerTrace {
    ViewerTrace::load(&fixtures().join("kelly/traces").join(format!("{name}.json"))).expect("kelly trace")
}

/// Compares `actual` with the file, or rewrites the file when UPDATE_GOLDEN=1.
pub fn golden(path: &Path, actual: &str) {
    if std::env::var("UPDATE_GOLDEN").as_deref() == Ok("1") {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    if expected != actual {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).unwrap_or(expected.lines().count().min(actual.lines().count()));
        panic!(
            "{} differs from the golden file at line {}\nexpected: {:?}\nactual:   {:?}",
            path.display(),
            line + 1,
            expected.lines().nth(line),
            actual.lines().nth(line)
        );
    }
}
