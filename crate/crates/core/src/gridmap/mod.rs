//! Binary occupancy grids: the inverse grid built from mixture samples, the
//! obstacle-only benchmark grid, inflation and the free-space precision metric.

mod pgm;

pub use pgm::{load_pgm, save_pgm, sidecar_path, GridMeta};

use serde::{Deserialize, Serialize};

use crate::geometry::{segment_intersects_rect, Rect, Vec2};
use crate::workzone::WorkZoneLayout;
use crate::{Error, Result};

pub const OCCUPIED: u8 = 1;
pub const FREE: u8 = 0;

/// Row-major binary raster. Cell `(ix, iy)` covers
/// `[origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

impl OccupancyGrid {
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize, occupied: bool) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        let fill = if occupied { OCCUPIED } else { FREE };
        Self {
            origin,
            resolution,
            width,
            height,
            cells: vec![fill; width * height],
        }
    }

    /// Smallest grid anchored at `bounds.min` that covers `bounds`.
    pub fn from_bounds(bounds: &Rect, resolution: f64, occupied: bool) -> Self {
        let w = (bounds.width() / resolution - 1e-9).ceil().max(1.0) as usize;
        let h = (bounds.height() / resolution - 1e-9).ceil().max(1.0) as usize;
        Self::new(bounds.min, resolution, w, h, occupied)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_rect(&self, ix: usize, iy: usize) -> Rect {
        let min = Vec2::new(
            self.origin.x + ix as f64 * self.resolution,
            self.origin.y + iy as f64 * self.resolution,
        );
        Rect::new(min, min + Vec2::new(self.resolution, self.resolution))
    }

    /// Signed cell coordinates of a world point, possibly outside the grid.
    pub fn world_to_cell(&self, p: &Vec2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_of(&self, p: &Vec2) -> Option<(usize, usize)> {
        let (ix, iy) = self.world_to_cell(p);
        self.in_bounds(ix, iy).then_some((ix as usize, iy as usize))
    }

    pub fn in_bounds(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.cells[self.index(ix, iy)] != FREE
    }

    pub fn is_free(&self, ix: usize, iy: usize) -> bool {
        !self.is_occupied(ix, iy)
    }

    /// Points outside the grid count as occupied.
    pub fn is_free_at(&self, p: &Vec2) -> bool {
        self.cell_of(p).is_some_and(|(ix, iy)| self.is_free(ix, iy))
    }

    pub fn set_free(&mut self, ix: usize, iy: usize) {
        let i = self.index(ix, iy);
        self.cells[i] = FREE;
    }

    pub fn set_occupied(&mut self, ix: usize, iy: usize) {
        let i = self.index(ix, iy);
        self.cells[i] = OCCUPIED;
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == FREE).count()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.len() - self.free_count()
    }

    pub fn same_frame(&self, other: &OccupancyGrid) -> bool {
        self.origin == other.origin
            && self.resolution == other.resolution
            && self.width == other.width
            && self.height == other.height
    }

    /// Split every cell into `factor x factor` children with the same state.
    pub fn subdivide(&self, factor: usize) -> OccupancyGrid {
        let mut out = OccupancyGrid::new(
            self.origin,
            self.resolution / factor as f64,
            self.width * factor,
            self.height * factor,
            false,
        );
        for iy in 0..out.height {
            for ix in 0..out.width {
                let i = out.index(ix, iy);
                out.cells[i] = self.cells[self.index(ix / factor, iy / factor)];
            }
        }
        out
    }

    /// Inclusive cell range touched by the closed interval `[lo, hi]` on one axis.
    fn axis_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.resolution).floor() as i64;
        let b = ((hi - origin) / self.resolution).floor() as i64;
        if b < 0 || a >= n as i64 {
            return None;
        }
        Some((a.max(0) as usize, b.min(n as i64 - 1) as usize))
    }
}

/// Inverse occupancy grid: everything starts occupied and each sample frees
/// every cell its `footprint_side` square touches.
pub fn from_samples(samples: &[Vec2], footprint_side: f64, bounds: &Rect, resolution: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::from_bounds(bounds, resolution, true);
    let half = footprint_side.max(0.0) / 2.0;
    for p in samples {
        let xs = grid.axis_range(p.x - half, p.x + half, grid.origin.x, grid.width);
        let ys = grid.axis_range(p.y - half, p.y + half, grid.origin.y, grid.height);
        if let (Some((x0, x1)), Some((y0, y1))) = (xs, ys) {
            for iy in y0..=y1 {
                let row = iy * grid.width;
                grid.cells[row + x0..=row + x1].fill(FREE);
            }
        }
    }
    grid
}

/// Obstacle-only benchmark grid: cone disks and road-edge polylines are
/// occupied, everything else is free. No lane semantics.
pub fn from_obstacles(layout: &WorkZoneLayout, cone_radius: f64, bounds: &Rect, resolution: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::from_bounds(bounds, resolution, false);
    let r2 = cone_radius * cone_radius;
    for cone in &layout.cones {
        if let Some((ix, iy)) = grid.cell_of(cone) {
            grid.set_occupied(ix, iy);
        }
        let xs = grid.axis_range(cone.x - cone_radius, cone.x + cone_radius, grid.origin.x, grid.width);
        let ys = grid.axis_range(cone.y - cone_radius, cone.y + cone_radius, grid.origin.y, grid.height);
        if let (Some((x0, x1)), Some((y0, y1))) = (xs, ys) {
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    if (grid.cell_center(ix, iy) - cone).norm_squared() <= r2 {
                        grid.set_occupied(ix, iy);
                    }
                }
            }
        }
    }
    for line in [&layout.road_boundary, &layout.left_edge] {
        for seg in line.windows(2) {
            rasterize_segment(&mut grid, &seg[0], &seg[1]);
        }
    }
    grid
}

fn rasterize_segment(grid: &mut OccupancyGrid, a: &Vec2, b: &Vec2) {
    let xs = grid.axis_range(a.x.min(b.x), a.x.max(b.x), grid.origin.x, grid.width);
    let ys = grid.axis_range(a.y.min(b.y), a.y.max(b.y), grid.origin.y, grid.height);
    if let (Some((x0, x1)), Some((y0, y1))) = (xs, ys) {
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                if segment_intersects_rect(a, b, &grid.cell_rect(ix, iy)) {
                    grid.set_occupied(ix, iy);
                }
            }
        }
    }
}

/// Cell offsets `(dx, dy)` whose center distance is within `radius`.
pub fn disk_offsets(radius: f64, resolution: f64) -> Vec<(i64, i64)> {
    // The tolerance keeps exact multiples of the resolution (0.7 / 0.1) inside.
    let rc = radius / resolution;
    let r = (rc + 1e-9).floor() as i64;
    let lim = rc * rc * (1.0 + 1e-9);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= lim {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Dilate occupied cells by a Euclidean disk of `radius` (cell-center distance).
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    let mut out = grid.clone();
    if radius <= 0.0 {
        return out;
    }
    let rc = radius / grid.resolution;
    let r = (rc + 1e-9).floor() as i64;
    let lim = rc * rc * (1.0 + 1e-9);
    // Half-width of the disk chord on each row offset.
    let spans: Vec<(i64, i64)> = (-r..=r)
        .map(|dy| {
            let rem = lim - (dy * dy) as f64;
            let mut w = rem.sqrt().floor() as i64;
            while ((w + 1) * (w + 1)) as f64 <= rem {
                w += 1;
            }
            while w > 0 && ((w * w) as f64) > rem {
                w -= 1;
            }
            (dy, w)
        })
        .collect();
    let (w, h) = (grid.width as i64, grid.height as i64);
    for iy in 0..h {
        let row = &grid.cells[(iy * w) as usize..((iy + 1) * w) as usize];
        let mut ix = 0i64;
        while ix < w {
            if row[ix as usize] == FREE {
                ix += 1;
                continue;
            }
            let start = ix;
            while ix < w && row[ix as usize] != FREE {
                ix += 1;
            }
            let end = ix - 1;
            for &(dy, half) in &spans {
                let y = iy + dy;
                if y < 0 || y >= h {
                    continue;
                }
                let x0 = (start - half).max(0);
                let x1 = (end + half).min(w - 1);
                let base = (y * w) as usize;
                out.cells[base + x0 as usize..=base + x1 as usize].fill(OCCUPIED);
            }
        }
    }
    out
}

/// Squared distance transform of one row or column (lower envelope of
/// parabolas). `f` holds squared distances, infinite where unconstrained.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    let mut started = false;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        let parabola_cut = |p: usize| {
            ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
        };
        let mut s = parabola_cut(v[k]);
        while k > 0 && s <= z[k] {
            k -= 1;
            s = parabola_cut(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !started {
        out.fill(f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance (m) from every cell centre to the nearest occupied
/// cell centre; infinite on a grid without occupied cells.
pub fn distance_field(grid: &OccupancyGrid) -> Vec<f64> {
    let (w, h) = (grid.width, grid.height);
    let n = w.max(h);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    let mut tmp = vec![0.0; w * h];
    for ix in 0..w {
        for (iy, c) in col_in.iter_mut().enumerate() {
            *c = if grid.cells[iy * w + ix] == OCCUPIED { 0.0 } else { f64::INFINITY };
        }
        edt_1d(&col_in, &mut col_out, &mut v, &mut z);
        for iy in 0..h {
            tmp[iy * w + ix] = col_out[iy];
        }
    }
    let mut out = vec![0.0; w * h];
    for iy in 0..h {
        let row = &tmp[iy * w..(iy + 1) * w];
        edt_1d(row, &mut out[iy * w..(iy + 1) * w], &mut v, &mut z);
    }
    for d in out.iter_mut() {
        *d = d.sqrt() * grid.resolution;
    }
    out
}

/// Free-space precision: `|pred free AND truth free| / |pred free|`.
pub fn precision(predicted: &OccupancyGrid, truth: &OccupancyGrid) -> Result<f64> {
    if !predicted.same_frame(truth) {
        return Err(Error::GridMismatch(format!(
            "{}x{} @ {} vs {}x{} @ {}",
            predicted.width,
            predicted.height,
            predicted.resolution,
            truth.width,
            truth.height,
            truth.resolution
        )));
    }
    let (mut tp, mut pred_free) = (0usize, 0usize);
    for (p, t) in predicted.cells.iter().zip(&truth.cells) {
        if *p == FREE {
            pred_free += 1;
            if *t == FREE {
                tp += 1;
            }
        }
    }
    if pred_free == 0 {
        return Err(Error::NoPredictedFree);
    }
    Ok(tp as f64 / pred_free as f64)
}
