//! Integer tile geometry. One tile is one character step; `y` grows southward.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub x: i32,
    pub y: i32,
}

impl Tile {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn step(self, dir: Direction) -> Tile {
        let (dx, dy) = dir.delta();
        Tile::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Tile) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn neighbors(self) -> [Tile; 4] {
        Direction::ALL.map(|d| self.step(d))
    }
}

impl fmt::Display for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Orthogonal direction. Also used as an object's facing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "N", alias = "north")]
    North,
    #[serde(rename = "S", alias = "south")]
    South,
    #[serde(rename = "E", alias = "east")]
    East,
    #[serde(rename = "W", alias = "west")]
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::South => (0, 1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }
}

/// Width and height in tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Size {
    pub w: u32,
    pub h: u32,
}

impl Size {
    pub const fn new(w: u32, h: u32) -> Self {
        Self { w, h }
    }

    pub fn area(self) -> u32 {
        self.w * self.h
    }
}

/// Axis-aligned rectangle of tiles, `x`/`y` is the top-left tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn at(origin: Tile, size: Size) -> Self {
        Self::new(origin.x, origin.y, size.w, size.h)
    }

    pub fn right(&self) -> i32 {
        self.x + self.w as i32
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h as i32
    }

    pub fn contains(&self, t: Tile) -> bool {
        t.x >= self.x && t.x < self.right() && t.y >= self.y && t.y < self.bottom()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }

    pub fn center(&self) -> Tile {
        Tile::new(self.x + self.w as i32 / 2, self.y + self.h as i32 / 2)
    }

    /// Tiles in row-major scan order (top-left to bottom-right).
    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        (self.y..self.bottom()).flat_map(move |y| (self.x..self.right()).map(move |x| Tile::new(x, y)))
    }

    /// Grows the rectangle by `n` tiles on every side.
    pub fn inflate(&self, n: u32) -> Rect {
        Rect::new(self.x - n as i32, self.y - n as i32, self.w + 2 * n, self.h + 2 * n)
    }

    /// Chebyshev gap between two rectangles; 0 when they touch or overlap.
    pub fn gap(&self, other: &Rect) -> u32 {
        let dx = (other.x - self.right()).max(self.x - other.right()).max(0) as u32;
        let dy = (other.y - self.bottom()).max(self.y - other.bottom()).max(0) as u32;
        dx.max(dy)
    }
}

/// A dense boolean grid, indexed by tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, fill: bool) -> Self {
        Self { width, height, cells: vec![fill; (width * height) as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn in_bounds(&self, t: Tile) -> bool {
        t.x >= 0 && t.y >= 0 && (t.x as u32) < self.width && (t.y as u32) < self.height
    }

    fn index(&self, t: Tile) -> Option<usize> {
        self.in_bounds(t).then(|| (t.y as u32 * self.width + t.x as u32) as usize)
    }

    pub fn get(&self, t: Tile) -> bool {
        self.index(t).map(|i| self.cells[i]).unwrap_or(false)
    }

    pub fn set(&mut self, t: Tile, v: bool) {
        if let Some(i) = self.index(t) {
            self.cells[i] = v;
        }
    }

    pub fn fill_rect(&mut self, r: &Rect, v: bool) {
        for t in r.tiles() {
            self.set(t, v);
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        let w = self.width as i32;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(move |(i, _)| Tile::new(i as i32 % w, i as i32 / w))
    }

    /// Rows rendered as `.` (true) and `#` (false).
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| if self.get(Tile::new(x as i32, y as i32)) { '.' } else { '#' })
                    .collect()
            })
            .collect()
    }

    pub fn from_rows(rows: &[String]) -> Result<Self, String> {
        let height = rows.len() as u32;
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0) as u32;
        let mut mask = Mask::new(width, height, false);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() as u32 != width {
                return Err(format!("mask row {y} has length {}, expected {width}", row.chars().count()));
            }
            for (x, c) in row.chars().enumerate() {
                match c {
                    '.' => mask.set(Tile::new(x as i32, y as i32), true),
                    '#' => {}
                    other => return Err(format!("mask row {y} has invalid cell {other:?}")),
                }
            }
        }
        Ok(mask)
    }
}

impl Serialize for Mask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<String>::deserialize(d)?;
        Mask::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_gap_and_intersection() {
        let a = Rect::new(0, 0, 2, 1);
        assert_eq!(a.gap(&Rect::new(2, 0, 1, 1)), 0);
        assert_eq!(a.gap(&Rect::new(3, 0, 1, 1)), 1);
        assert_eq!(a.gap(&Rect::new(0, 3, 1, 1)), 2);
        assert!(!a.intersects(&Rect::new(2, 0, 1, 1)));
        assert!(a.intersects(&Rect::new(1, 0, 1, 1)));
    }

    #[test]
    fn mask_rows_round_trip() {
        let mut m = Mask::new(3, 2, false);
        m.set(Tile::new(1, 1), true);
        let rows = m.to_rows();
        assert_eq!(rows, vec!["###".to_string(), "#.#".to_string()]);
        assert_eq!(Mask::from_rows(&rows).unwrap(), m);
    }
}
