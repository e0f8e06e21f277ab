//! Headless replay of viewer traces and the ranking statistics used to compare planner modes.

pub mod agents;
pub mod check;
pub mod gen;
pub mod run;
pub mod stats;

pub use stats::{RankingDataset, Real, StatsError};

/// Friedman result in `f64`.
pub type Friedman = stats::Friedman<f64>;

pub fn friedman_test(data: &RankingDataset) -> Friedman {
    stats::friedman_test(data)
}

pub fn nemenyi_posthoc(data: &RankingDataset) -> Vec<Vec<f64>> {
    stats::nemenyi_posthoc(data)
}

pub fn mean_rankings(data: &RankingDataset) -> Vec<f64> {
    stats::mean_rankings(data)
}
