#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use vignette_core::llm::{Gateway, MockScript, ScriptedMock};
use vignette_core::spec::{decode_spec, VignetteSpec};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn kelly_script() -> MockScript {
    MockScript::load(&fixtures().join("kelly/mock.json")).expect("kelly mock script")
}

pub fn mock_gateway(script: MockScript) -> (Gateway, Arc<ScriptedMock>) {
    let mock = Arc::new(ScriptedMock::new(script));
    (Gateway::new(mock.clone()), mock)
}

pub fn kelly_spec() -> VignetteSpec {
    let bytes = std::fs::read(fixtures().join("kelly/kelly.vignette.json")).expect("kelly spec fixture");
    decode_spec(&bytes).expect("kelly spec decodes")
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
