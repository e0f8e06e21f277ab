//! Interactive-vignette element types, their invariants and the document format.

mod codec;
mod types;
mod validate;

pub use codec::*;
pub use types::*;
pub use validate::*;
