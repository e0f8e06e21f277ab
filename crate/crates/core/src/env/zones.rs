//! Trigger zones: the tiles a character must occupy to use an object.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::geometry::{Direction, Mask, Rect, Size, Tile};
use crate::spec::{ObjectInstance, TriggerZone, ZoneType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ZONE_UNREACHABLE: no floor tile can trigger a {zone_type:?} zone at {position}")]
pub struct ZoneError {
    pub position: Tile,
    pub zone_type: ZoneType,
}

/// The front part of a footprint: `ceil(len / 2)` rows or columns on the facing side.
pub fn default_partial(footprint: Size, facing: Direction) -> Rect {
    let (w, h) = (footprint.w, footprint.h);
    match facing {
        Direction::South => Rect::new(0, (h / 2) as i32, w, h.div_ceil(2)),
        Direction::North => Rect::new(0, 0, w, h.div_ceil(2)),
        Direction::East => Rect::new((w / 2) as i32, 0, w.div_ceil(2), h),
        Direction::West => Rect::new(0, 0, w.div_ceil(2), h),
    }
}

/// Tiles for a zone of `zone_type` around the footprint at `position`.
///
/// Seated zones (on, partial) lie on the footprint. Around and directional
/// zones lie outside it and are clipped to `floor`. `partial` is the seat
/// sub-rectangle relative to the footprint's top-left; `None` means the
/// front half.
pub fn compute_trigger_tiles(
    position: Tile,
    footprint: Size,
    zone_type: ZoneType,
    facing: Direction,
    floor: &Mask,
    partial: Option<Rect>,
) -> Result<BTreeSet<Tile>, ZoneError> {
    let rect = Rect::at(position, footprint);
    let tiles: BTreeSet<Tile> = match zone_type {
        ZoneType::On => rect.tiles().collect(),
        ZoneType::Partial => {
            let sub = partial.unwrap_or_else(|| default_partial(footprint, facing));
            let abs = Rect::new(position.x + sub.x, position.y + sub.y, sub.w, sub.h);
            abs.tiles().filter(|t| rect.contains(*t)).collect()
        }
        ZoneType::Around => rect.inflate(1).tiles().filter(|t| !rect.contains(*t) && floor.get(*t)).collect(),
        ZoneType::Directional => {
            let row = match facing {
                Direction::North => Rect::new(rect.x, rect.y - 1, rect.w, 1),
                Direction::South => Rect::new(rect.x, rect.bottom(), rect.w, 1),
                Direction::West => Rect::new(rect.x - 1, rect.y, 1, rect.h),
                Direction::East => Rect::new(rect.right(), rect.y, 1, rect.h),
            };
            row.tiles().filter(|t| floor.get(*t)).collect()
        }
    };
    if tiles.is_empty() {
        return Err(ZoneError { position, zone_type });
    }
    Ok(tiles)
}

/// Zone tiles a character can actually stand on right now.
pub fn usable_zone_tiles(standable: &Mask, object: &ObjectInstance) -> BTreeSet<Tile> {
    object.zone.tiles.iter().copied().filter(|t| standable.get(*t)).collect()
}

/// Whether some usable tile of `zone` can be reached: walkable tiles must be
/// in `reach`, seat tiles only need a reached neighbour.
pub fn zone_reachable(zone: &TriggerZone, walkable: &Mask, standable: &Mask, reach: &Mask) -> bool {
    zone.tiles.iter().any(|t| {
        if walkable.get(*t) {
            reach.get(*t)
        } else {
            standable.get(*t) && t.neighbors().iter().any(|n| reach.get(*n))
        }
    })
}

/// Recomputes one object's zone against the environment's floor.
pub fn rezone_object(object: &mut ObjectInstance, floor: &Mask, partial: Option<Rect>) -> Result<(), ZoneError> {
    object.zone.tiles =
        compute_trigger_tiles(object.position, object.footprint, object.zone.zone_type, object.facing, floor, partial)?;
    Ok(())
}
