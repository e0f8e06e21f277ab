//! Environment building: affordances, trigger zones, placement, pathing and checks.

mod affordance;
mod check;
mod pathing;
mod placement;
mod zones;

pub use affordance::*;
pub use check::*;
pub use pathing::*;
pub use placement::*;
pub use zones::*;

#[cfg(test)]
mod tests;
