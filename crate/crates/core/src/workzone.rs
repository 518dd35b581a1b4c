//! MUTCD-style lane-closure layout.
//!
//! Frame: `x` runs along the direction of travel (0 at the start of the
//! merging taper), `y` is lateral with positive to the left. Lane 0 is the
//! rightmost lane with its right edge at `y = 0`; the right shoulder spans
//! `[-shoulder_width, 0]`. The closure removes the lanes from
//! `closed_lane_index` up to the left road edge, so traffic merges right and
//! passes with the cones on its left and the open shoulder on its right.

use serde::{Deserialize, Serialize};

use crate::geometry::{point_in_polygon, Rect, Vec2};
use crate::gridmap::OccupancyGrid;
use crate::{Error, Result};

pub const FT_TO_M: f64 = 0.3048;

pub fn ft_to_m(ft: f64) -> f64 {
    ft * FT_TO_M
}

/// Work-zone parameters in US customary units (mph, ft).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkZoneSpec {
    pub speed_limit: f64,
    pub lane_width: f64,
    pub n_lanes: usize,
    pub shoulder_width: f64,
    /// First closed lane counted from the right; every lane to its left is closed too.
    pub closed_lane_index: usize,
    pub cone_spacing: f64,
    pub activity_length: f64,
    pub activity_width: f64,
    /// Lateral inset of the cone line into the closed lanes.
    pub cone_offset: f64,
    /// Open road kept before the merging taper and after the shifting taper.
    pub approach_length: f64,
}

impl Default for WorkZoneSpec {
    fn default() -> Self {
        Self {
            speed_limit: 60.0,
            lane_width: 12.0,
            n_lanes: 3,
            shoulder_width: 8.0,
            closed_lane_index: 2,
            cone_spacing: 40.0,
            activity_length: 650.0,
            activity_width: 12.0,
            cone_offset: 1.5,
            approach_length: 500.0,
        }
    }
}

impl WorkZoneSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("speed_limit", self.speed_limit),
            ("lane_width", self.lane_width),
            ("cone_spacing", self.cone_spacing),
            ("activity_length", self.activity_length),
            ("activity_width", self.activity_width),
            ("cone_offset", self.cone_offset),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("shoulder_width", self.shoulder_width),
            ("approach_length", self.approach_length),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.n_lanes < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_lanes must be >= 2, got {}",
                self.n_lanes
            )));
        }
        if self.closed_lane_index >= self.n_lanes {
            return Err(Error::InvalidSpec(format!(
                "closed_lane_index {} out of range for {} lanes",
                self.closed_lane_index, self.n_lanes
            )));
        }
        if self.closed_lane_index == 0 {
            return Err(Error::InvalidSpec(
                "closed_lane_index 0 would close every lane".into(),
            ));
        }
        if self.activity_width > self.closed_width_ft() + 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "activity_width {} ft exceeds the closed width {} ft",
                self.activity_width,
                self.closed_width_ft()
            )));
        }
        Ok(())
    }

    /// Lateral offset traffic has to shift, in feet.
    pub fn closed_width_ft(&self) -> f64 {
        (self.n_lanes - self.closed_lane_index) as f64 * self.lane_width
    }

    /// MUTCD merging taper: `L = W*S` at 45 mph and above, `W*S^2/60` below.
    pub fn merging_taper_ft(&self) -> f64 {
        let w = self.closed_width_ft();
        let s = self.speed_limit;
        if s >= 45.0 {
            w * s
        } else {
            w * s * s / 60.0
        }
    }

    pub fn shifting_taper_ft(&self) -> f64 {
        self.merging_taper_ft() / 2.0
    }

    pub fn shoulder_taper_ft(&self) -> f64 {
        (self.merging_taper_ft() / 3.0).round()
    }
}

/// Longitudinal stations of the layout, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stations {
    pub road_start: f64,
    pub merge_start: f64,
    pub merge_end: f64,
    pub activity_end: f64,
    pub shift_end: f64,
    pub road_end: f64,
}

/// Geometry of a built work zone. All values in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkZoneLayout {
    pub lane_width: f64,
    pub n_lanes: usize,
    pub closed_lane_index: usize,
    pub shoulder_width: f64,
    pub merging_taper: f64,
    pub shifting_taper: f64,
    pub shoulder_taper: f64,
    pub stations: Stations,
    pub activity_area: Rect,
    /// Cones in order along the channelizing line.
    pub cones: Vec<Vec2>,
    /// Lane lines from the right edge (`y = 0`) to the left road edge.
    pub lane_boundaries: Vec<Vec<Vec2>>,
    pub drivable_polygon: Vec<Vec2>,
    /// Closed lanes, activity area and both taper wedges.
    pub closed_region: Vec<Vec2>,
    /// Outer edge of the right shoulder.
    pub road_boundary: Vec<Vec2>,
    pub left_edge: Vec<Vec2>,
}

/// Number of evenly spaced cones needed so that no gap exceeds `spacing`.
pub fn cone_count(length: f64, spacing: f64) -> usize {
    (length / spacing).ceil() as usize + 1
}

fn cones_along(a: Vec2, b: Vec2, spacing: f64) -> Vec<Vec2> {
    let n = cone_count((b - a).norm(), spacing);
    (0..n)
        .map(|i| a + (b - a) * (i as f64 / (n - 1) as f64))
        .collect()
}

pub fn build_layout(spec: &WorkZoneSpec) -> Result<WorkZoneLayout> {
    spec.validate()?;

    let w = ft_to_m(spec.lane_width);
    let shoulder = ft_to_m(spec.shoulder_width);
    let spacing = ft_to_m(spec.cone_spacing);
    let offset = ft_to_m(spec.cone_offset);
    let merging = ft_to_m(spec.merging_taper_ft());
    let shifting = ft_to_m(spec.shifting_taper_ft());
    let approach = ft_to_m(spec.approach_length);
    let activity_len = ft_to_m(spec.activity_length);

    let stations = Stations {
        road_start: -approach,
        merge_start: 0.0,
        merge_end: merging,
        activity_end: merging + activity_len,
        shift_end: merging + activity_len + shifting,
        road_end: merging + activity_len + shifting + approach,
    };
    let top = spec.n_lanes as f64 * w;
    let bottom = spec.closed_lane_index as f64 * w;

    let mut cones = cones_along(
        Vec2::new(stations.merge_start, top + offset),
        Vec2::new(stations.merge_end, bottom + offset),
        spacing,
    );
    for seg in [
        (
            Vec2::new(stations.merge_end, bottom + offset),
            Vec2::new(stations.activity_end, bottom + offset),
        ),
        (
            Vec2::new(stations.activity_end, bottom + offset),
            Vec2::new(stations.shift_end, top + offset),
        ),
    ] {
        cones.extend(cones_along(seg.0, seg.1, spacing).into_iter().skip(1));
    }

    let hline = |y: f64| {
        vec![
            Vec2::new(stations.road_start, y),
            Vec2::new(stations.road_end, y),
        ]
    };
    let lane_boundaries = (0..=spec.n_lanes).map(|k| hline(k as f64 * w)).collect();

    let drivable_polygon = vec![
        Vec2::new(stations.road_start, 0.0),
        Vec2::new(stations.road_end, 0.0),
        Vec2::new(stations.road_end, top),
        Vec2::new(stations.shift_end, top),
        Vec2::new(stations.activity_end, bottom),
        Vec2::new(stations.merge_end, bottom),
        Vec2::new(stations.merge_start, top),
        Vec2::new(stations.road_start, top),
    ];
    let closed_region = vec![
        Vec2::new(stations.merge_start, top),
        Vec2::new(stations.merge_end, bottom),
        Vec2::new(stations.activity_end, bottom),
        Vec2::new(stations.shift_end, top),
    ];
    let activity_area = Rect::new(
        Vec2::new(stations.merge_end, bottom),
        Vec2::new(stations.activity_end, bottom + ft_to_m(spec.activity_width)),
    );

    Ok(WorkZoneLayout {
        lane_width: w,
        n_lanes: spec.n_lanes,
        closed_lane_index: spec.closed_lane_index,
        shoulder_width: shoulder,
        merging_taper: merging,
        shifting_taper: shifting,
        shoulder_taper: ft_to_m(spec.shoulder_taper_ft()),
        stations,
        activity_area,
        cones,
        lane_boundaries,
        drivable_polygon,
        closed_region,
        road_boundary: hline(-shoulder),
        left_edge: hline(top),
    })
}

impl WorkZoneLayout {
    pub fn road_width(&self) -> f64 {
        self.n_lanes as f64 * self.lane_width
    }

    /// Lateral position of the closure edge (lane-line based) at station `x`.
    /// Equals the left road edge outside the tapered span.
    pub fn closure_edge(&self, x: f64) -> f64 {
        let s = &self.stations;
        let top = self.road_width();
        let bottom = self.closed_lane_index as f64 * self.lane_width;
        if x <= s.merge_start || x >= s.shift_end {
            top
        } else if x < s.merge_end {
            top + (bottom - top) * (x - s.merge_start) / (s.merge_end - s.merge_start)
        } else if x <= s.activity_end {
            bottom
        } else {
            bottom + (top - bottom) * (x - s.activity_end) / (s.shift_end - s.activity_end)
        }
    }

    /// Center of the first closed lane; where crowd vehicles start and end.
    pub fn closed_lane_center(&self) -> f64 {
        (self.closed_lane_index as f64 + 0.5) * self.lane_width
    }

    /// Center of the open lane adjacent to the closure.
    pub fn open_lane_center(&self) -> f64 {
        (self.closed_lane_index as f64 - 0.5) * self.lane_width
    }

    pub fn is_drivable(&self, p: &Vec2) -> bool {
        point_in_polygon(p, &self.drivable_polygon)
    }

    pub fn in_closed_region(&self, p: &Vec2) -> bool {
        point_in_polygon(p, &self.closed_region)
    }

    /// Road extent with a one-meter margin on both sides.
    pub fn default_bounds(&self) -> Rect {
        Rect::new(
            Vec2::new(self.stations.road_start, -self.shoulder_width - 1.0),
            Vec2::new(self.stations.road_end, self.road_width() + 1.0),
        )
    }

    /// Cone line as a polyline; the work-zone edge used for clearance.
    pub fn cone_line(&self) -> &[Vec2] {
        &self.cones
    }
}

/// Ground-truth drivable grid: a cell is free iff its center is inside the
/// drivable polygon.
pub fn ground_truth_grid(layout: &WorkZoneLayout, bounds: &Rect, resolution: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::from_bounds(bounds, resolution, true);
    for iy in 0..grid.height {
        for ix in 0..grid.width {
            let c = grid.cell_center(ix, iy);
            if layout.is_drivable(&c) {
                grid.set_free(ix, iy);
            }
        }
    }
    grid
}
