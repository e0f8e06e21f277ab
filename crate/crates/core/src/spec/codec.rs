//! Canonical `.vignette.json` encoding.
//!
//! Field order follows struct declaration order and maps are sorted, so the
//! same spec always encodes to the same bytes.

use thiserror::Error;

use super::types::VignetteSpec;
use super::validate::{validate_spec, ValidationReport};

pub const FILE_EXTENSION: &str = ".vignette.json";

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse { offset: usize, line: usize, column: usize, message: String },
    #[error("spec violates invariants:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Error)]
#[error("refusing to encode an invalid spec:\n{0}")]
pub struct EncodeError(pub ValidationReport);

/// Encodes a valid spec as pretty-printed UTF-8 JSON with a trailing newline.
pub fn encode_spec(spec: &VignetteSpec) -> Result<Vec<u8>, EncodeError> {
    let report = validate_spec(spec);
    if !report.is_empty() {
        return Err(EncodeError(report));
    }
    Ok(encode_unchecked(spec))
}

/// Encodes without validating; used for drafts.
pub fn encode_unchecked(spec: &VignetteSpec) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(spec).expect("spec serialization is infallible");
    out.push(b'\n');
    out
}

pub fn decode_spec(bytes: &[u8]) -> Result<VignetteSpec, DecodeError> {
    let spec = decode_unchecked(bytes)?;
    let report = validate_spec(&spec);
    if report.is_empty() {
        Ok(spec)
    } else {
        Err(DecodeError::Invalid(report))
    }
}

pub fn decode_unchecked(bytes: &[u8]) -> Result<VignetteSpec, DecodeError> {
    serde_json::from_slice(bytes).map_err(|e| parse_error(bytes, &e))
}

fn parse_error(bytes: &[u8], e: &serde_json::Error) -> DecodeError {
    let (line, column) = (e.line(), e.column());
    DecodeError::Parse { offset: byte_offset(bytes, line, column), line, column, message: e.to_string() }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|b| *b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}
