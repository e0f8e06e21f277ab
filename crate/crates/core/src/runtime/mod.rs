//! Branch-and-bottleneck runtime: movement, zones, glow cues, key-event progression and chat.

mod command;
mod log;
mod table;
mod world;

pub use command::*;
pub use log::*;
pub use table::*;
pub use world::*;

#[cfg(test)]
mod tests;
