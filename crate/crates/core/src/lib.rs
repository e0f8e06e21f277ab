//! Interactive vignettes: turn a short first-person story into a playable
//! scene and run it as a branch-and-bottleneck simulation.

pub mod catalog;
pub mod env;
pub mod extract;
pub mod geometry;
pub mod llm;
pub mod planner;
pub mod runtime;
pub mod spec;

/// Lowercase ASCII identifier: runs of anything else become one `_`.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}
