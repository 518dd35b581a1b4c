use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::Pose;
use crate::geometry::Vec2;
use crate::gridmap::OccupancyGrid;
use crate::{Error, Result};

/// Obstacle-aware 8-connected distance from every cell to the goal cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) const NEIGHBOURS: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT_2),
    (1, -1, SQRT_2),
    (-1, 1, SQRT_2),
    (-1, -1, SQRT_2),
];

/// Whether the move `(dx, dy)` from `(ix, iy)` is legal: target free and, for
/// diagonal moves, both side cells free so walls cannot be cut through.
pub(crate) fn move_allowed(grid: &OccupancyGrid, ix: i64, iy: i64, dx: i64, dy: i64) -> bool {
    let free = |x: i64, y: i64| grid.in_bounds(x, y) && grid.is_free(x as usize, y as usize);
    free(ix + dx, iy + dy) && (dx == 0 || dy == 0 || (free(ix + dx, iy) && free(ix, iy + dy)))
}

pub fn holonomic_heuristic(grid: &OccupancyGrid, goal: &Pose) -> Result<CostField> {
    weighted_heuristic(grid, goal, &[])
}

/// Like [`holonomic_heuristic`] but each move costs its length times
/// `1 + min(extra[a], extra[b])` over the two cells it joins, so per-metre
/// penalties of the search show up in the estimate. An empty `extra` means
/// plain distance.
pub fn weighted_heuristic(grid: &OccupancyGrid, goal: &Pose, extra: &[f64]) -> Result<CostField> {
    if !extra.is_empty() && extra.len() != grid.width * grid.height {
        return Err(Error::InvalidParam("extra cost must cover the grid".into()));
    }
    let (gx, gy) = grid.world_to_cell(&goal.position());
    if !grid.in_bounds(gx, gy) || grid.is_occupied(gx as usize, gy as usize) {
        return Err(Error::GoalOccupied);
    }
    let mut values = vec![f64::INFINITY; grid.width * grid.height];
    let mut heap = BinaryHeap::new();
    let start = grid.index(gx as usize, gy as usize);
    values[start] = 0.0;
    heap.push(Entry(0.0, start));
    while let Some(Entry(d, idx)) = heap.pop() {
        if d > values[idx] {
            continue;
        }
        let (ix, iy) = ((idx % grid.width) as i64, (idx / grid.width) as i64);
        for &(dx, dy, w) in &NEIGHBOURS {
            if !move_allowed(grid, ix, iy, dx, dy) {
                continue;
            }
            let n = grid.index((ix + dx) as usize, (iy + dy) as usize);
            let scale = if extra.is_empty() { 1.0 } else { 1.0 + extra[idx].min(extra[n]) };
            let nd = d + w * grid.resolution * scale;
            if nd < values[n] {
                values[n] = nd;
                heap.push(Entry(nd, n));
            }
        }
    }
    Ok(CostField {
        origin: grid.origin,
        resolution: grid.resolution,
        width: grid.width,
        height: grid.height,
        values,
    })
}

impl CostField {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    /// Bilinear interpolation between cell centres, falling back to the
    /// containing cell next to unreachable cells. Outside the grid: infinite.
    pub fn interpolate(&self, p: &Vec2) -> f64 {
        let fx = (p.x - self.origin.x) / self.resolution - 0.5;
        let fy = (p.y - self.origin.y) / self.resolution - 0.5;
        let cx = ((p.x - self.origin.x) / self.resolution).floor();
        let cy = ((p.y - self.origin.y) / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return f64::INFINITY;
        }
        let own = self.at(cx as usize, cy as usize);
        let (x0, y0) = (fx.floor(), fy.floor());
        if x0 < 0.0 || y0 < 0.0 || x0 + 1.0 >= self.width as f64 || y0 + 1.0 >= self.height as f64 {
            return own;
        }
        let (ix, iy) = (x0 as usize, y0 as usize);
        let v = [
            self.at(ix, iy),
            self.at(ix + 1, iy),
            self.at(ix, iy + 1),
            self.at(ix + 1, iy + 1),
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return own;
        }
        let (tx, ty) = (fx - x0, fy - y0);
        (v[0] * (1.0 - tx) + v[1] * tx) * (1.0 - ty) + (v[2] * (1.0 - tx) + v[3] * tx) * ty
    }
}
