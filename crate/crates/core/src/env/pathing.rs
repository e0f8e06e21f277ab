//! Breadth-first search over 4-connected tile grids.

use std::collections::{BTreeSet, VecDeque};

use crate::geometry::{Mask, Tile};

/// Every tile reachable from `start` through `walkable` tiles. `start` itself is always included.
pub fn reachable_from(walkable: &Mask, start: Tile) -> Mask {
    let mut seen = Mask::new(walkable.width(), walkable.height(), false);
    if !walkable.in_bounds(start) {
        return seen;
    }
    seen.set(start, true);
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        for n in t.neighbors() {
            if walkable.get(n) && !seen.get(n) {
                seen.set(n, true);
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Shortest 4-connected path from `from` to any tile of `to`, both ends included.
///
/// Intermediate tiles must be walkable. The start tile is allowed even when it
/// is not (a seated character getting up), and target tiles may be entered
/// even when not walkable (sitting down on a chair). Neighbours are expanded
/// N, E, S, W, so ties between equal-length paths break deterministically.
pub fn find_path(walkable: &Mask, from: Tile, to: &BTreeSet<Tile>) -> Option<Vec<Tile>> {
    if to.contains(&from) {
        return Some(vec![from]);
    }
    if to.is_empty() || !walkable.in_bounds(from) {
        return None;
    }
    let w = walkable.width() as usize;
    let idx = |t: Tile| t.y as usize * w + t.x as usize;
    let mut parent: Vec<Option<Tile>> = vec![None; w * walkable.height() as usize];
    let mut seen = Mask::new(walkable.width(), walkable.height(), false);
    seen.set(from, true);
    let mut queue = VecDeque::from([from]);
    while let Some(t) = queue.pop_front() {
        for n in t.neighbors() {
            if !walkable.in_bounds(n) || seen.get(n) {
                continue;
            }
            let target = to.contains(&n);
            if !target && !walkable.get(n) {
                continue;
            }
            seen.set(n, true);
            parent[idx(n)] = Some(t);
            if target {
                let mut path = vec![n];
                let mut cur = n;
                while let Some(p) = parent[idx(cur)] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(n);
        }
    }
    None
}
