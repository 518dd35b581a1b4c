//! Hybrid A* over an occupancy grid with forward-only, curvature-bounded
//! motion primitives.

mod heuristic;

pub use heuristic::{holonomic_heuristic, weighted_heuristic, CostField};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::{PI, SQRT_2};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, point_segment_distance, Vec2};
use crate::gridmap::{distance_field, OccupancyGrid};
use crate::trajectory::parse_field;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    pub poses: Vec<Pose>,
    pub arc_step: f64,
}

impl ReferencePath {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.poses.iter().map(Pose::position).collect()
    }

    /// Cumulative chord length at each pose.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.poses.len());
        let mut acc = 0.0;
        for (i, p) in self.poses.iter().enumerate() {
            if i > 0 {
                acc += (p.position() - self.poses[i - 1].position()).norm();
            }
            s.push(acc);
        }
        s
    }

    pub fn length(&self) -> f64 {
        self.arc_lengths().last().copied().unwrap_or(0.0)
    }

    /// Largest `|dheading| / ds` over consecutive pose pairs.
    pub fn max_curvature(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| {
                let ds = (w[1].position() - w[0].position()).norm();
                let dh = normalize_angle(w[1].heading - w[0].heading).abs();
                if ds > 0.0 {
                    dh / ds
                } else if dh > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn max_spacing(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| (w[1].position() - w[0].position()).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub heading_bins: usize,
    /// Extra cost per metre driven on a turning primitive.
    pub turn_penalty: f64,
    /// Extra cost for switching between primitives.
    pub steer_change_penalty: f64,
    /// Extra cost per metre driven at zero obstacle distance, fading
    /// linearly to nothing at `proximity_range`.
    pub proximity_weight: f64,
    pub proximity_range: f64,
    /// Extra cost per metre driven per metre of distance from the
    /// start-goal chord (adherence to the mapped route).
    pub route_weight: f64,
    pub goal_position_tolerance: f64,
    /// Degrees.
    pub goal_heading_tolerance: f64,
    pub max_expansions: usize,
    /// Primitive arc length. `None` picks the larger of one grid-cell
    /// diagonal and the arc that turns through one heading bin at `r_min`.
    pub step: Option<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            heading_bins: 72,
            turn_penalty: 0.05,
            steer_change_penalty: 0.1,
            proximity_weight: 1.0,
            proximity_range: 1.0,
            route_weight: 0.02,
            goal_position_tolerance: 0.5,
            goal_heading_tolerance: 10.0,
            max_expansions: 3_000_000,
            step: None,
        }
    }
}

struct Node {
    pose: Pose,
    g: f64,
    parent: usize,
    steer: i8,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    seq: usize,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed so the max-heap pops the lowest f, then h, then oldest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn heading_bin(heading: f64, bins: usize) -> usize {
    let t = (heading + PI).rem_euclid(2.0 * PI) / (2.0 * PI);
    ((t * bins as f64).floor() as usize).min(bins - 1)
}

/// Exact arc of length `ds` at signed curvature `kappa`.
fn advance(p: &Pose, kappa: f64, ds: f64) -> Pose {
    if kappa == 0.0 {
        return Pose::new(p.x + ds * p.heading.cos(), p.y + ds * p.heading.sin(), p.heading);
    }
    let h1 = p.heading + kappa * ds;
    Pose::new(
        p.x + (h1.sin() - p.heading.sin()) / kappa,
        p.y - (h1.cos() - p.heading.cos()) / kappa,
        h1,
    )
}

/// Shorter turning primitives would stay inside their parent's heading bin
/// and collapse onto the straight successor in the closed set.
pub fn default_step(resolution: f64, r_min: f64, heading_bins: usize) -> f64 {
    (resolution * SQRT_2).max(r_min * 2.0 * PI / heading_bins as f64)
}

pub fn hybrid_astar(
    grid: &OccupancyGrid,
    start: &Pose,
    goal: &Pose,
    r_min: f64,
    params: &PlannerParams,
) -> Result<ReferencePath> {
    if !(r_min > 0.0) || params.heading_bins == 0 {
        return Err(Error::InvalidParam("r_min and heading_bins must be positive".into()));
    }
    if !grid.is_free_at(&start.position()) || !grid.is_free_at(&goal.position()) {
        return Err(Error::StartOrGoalOccupied);
    }
    let clearance = if params.proximity_weight > 0.0 && params.proximity_range > 0.0 {
        distance_field(grid)
    } else {
        Vec::new()
    };
    let proximity_at = |d: f64| params.proximity_weight * (1.0 - d / params.proximity_range).max(0.0);
    let start_pos = start.position();
    let goal_pos = goal.position();
    let route = |p: &Vec2| params.route_weight * point_segment_distance(p, &start_pos, &goal_pos);
    let extra: Vec<f64> = if clearance.is_empty() && params.route_weight == 0.0 {
        Vec::new()
    } else {
        (0..grid.width * grid.height)
            .map(|i| {
                let c = grid.cell_center(i % grid.width, i / grid.width);
                clearance.get(i).map_or(0.0, |&d| proximity_at(d)) + route(&c)
            })
            .collect()
    };
    let field = weighted_heuristic(grid, goal, &extra)?;
    let penalty = |p: &Pose| -> f64 {
        let pos = p.position();
        let prox = if clearance.is_empty() {
            0.0
        } else {
            let (ix, iy) = grid.world_to_cell(&pos);
            proximity_at(clearance[grid.index(ix as usize, iy as usize)])
        };
        prox + route(&pos)
    };
    let step = params.step.unwrap_or_else(|| default_step(grid.resolution, r_min, params.heading_bins));
    let checks = (step / grid.resolution).ceil().max(2.0) as usize;
    let heading_tol = params.goal_heading_tolerance.to_radians();
    let h_of = |p: &Pose| {
        let e = (p.position() - goal_pos).norm();
        e.max(field.interpolate(&p.position()))
    };
    let key = |p: &Pose| {
        let (ix, iy) = grid.world_to_cell(&p.position());
        (ix, iy, heading_bin(p.heading, params.heading_bins))
    };

    let h0 = h_of(start);
    if !h0.is_finite() {
        return Err(Error::NoPath { expansions: 0 });
    }
    let mut nodes = vec![Node {
        pose: *start,
        g: 0.0,
        parent: usize::MAX,
        steer: 0,
    }];
    let mut open = BinaryHeap::new();
    let mut seq = 0;
    open.push(Open { f: h0, h: h0, seq, node: 0 });
    let mut closed = HashSet::new();
    let mut expansions = 0;

    while let Some(Open { node: id, .. }) = open.pop() {
        let pose = nodes[id].pose;
        if !closed.insert(key(&pose)) {
            continue;
        }
        if (pose.position() - goal_pos).norm() <= params.goal_position_tolerance
            && normalize_angle(pose.heading - goal.heading).abs() <= heading_tol
        {
            return Ok(reconstruct(&nodes, id, step));
        }
        expansions += 1;
        if expansions > params.max_expansions {
            break;
        }
        for steer in [-1i8, 0, 1] {
            let kappa = f64::from(steer) / r_min;
            let child = advance(&pose, kappa, step);
            let blocked = (1..=checks).any(|i| {
                let p = advance(&pose, kappa, step * i as f64 / checks as f64);
                !grid.is_free_at(&p.position())
            });
            if blocked {
                continue;
            }
            if closed.contains(&key(&child)) {
                continue;
            }
            let h = h_of(&child);
            if !h.is_finite() {
                continue;
            }
            let parent = &nodes[id];
            let g = parent.g
                + step
                    * (1.0
                        + params.turn_penalty * f64::from(steer.abs())
                        + penalty(&child))
                + params.steer_change_penalty * f64::from((steer - parent.steer).abs());
            nodes.push(Node {
                pose: child,
                g,
                parent: id,
                steer,
            });
            seq += 1;
            open.push(Open {
                f: g + h,
                h,
                seq,
                node: nodes.len() - 1,
            });
        }
    }
    Err(Error::NoPath { expansions })
}

fn reconstruct(nodes: &[Node], mut id: usize, step: f64) -> ReferencePath {
    let mut poses = Vec::new();
    while id != usize::MAX {
        poses.push(nodes[id].pose);
        id = nodes[id].parent;
    }
    poses.reverse();
    ReferencePath { poses, arc_step: step }
}

/// Re-parameterizes the path at uniform chord-length spacing, keeping both
/// endpoints. Headings are interpolated along the shorter arc.
pub fn resample(path: &ReferencePath, step: f64) -> Result<ReferencePath> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParam(format!("step must be > 0, got {step}")));
    }
    let s = path.arc_lengths();
    let total = *s.last().expect("non-empty");
    let mut poses = vec![path.poses[0]];
    let mut seg = 0;
    let mut k = 1;
    loop {
        let target = k as f64 * step;
        if target >= total - 1e-9 * step.max(1.0) {
            break;
        }
        while s[seg + 1] < target {
            seg += 1;
        }
        let (a, b) = (&path.poses[seg], &path.poses[seg + 1]);
        let len = s[seg + 1] - s[seg];
        let t = if len > 0.0 { (target - s[seg]) / len } else { 0.0 };
        poses.push(Pose::new(
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.heading + t * normalize_angle(b.heading - a.heading),
        ));
        k += 1;
    }
    if path.len() > 1 {
        poses.push(*path.poses.last().expect("non-empty"));
    }
    Ok(ReferencePath { poses, arc_step: step })
}

pub fn save_path_csv(path: &ReferencePath, file: &Path) -> Result<()> {
    let mut out = String::from("s,x,y,heading\n");
    for (p, s) in path.poses.iter().zip(path.arc_lengths()) {
        out.push_str(&format!("{s:.6},{:.6},{:.6},{:.6}\n", p.x, p.y, p.heading));
    }
    std::fs::write(file, out).map_err(|e| Error::io(file, e))
}

pub fn load_path_csv(file: &Path) -> Result<ReferencePath> {
    let f = File::open(file).map_err(|e| Error::io(file, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(f);
    let mut poses = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        poses.push(Pose::new(
            parse_field(&rec, 1, line, "x")?,
            parse_field(&rec, 2, line, "y")?,
            parse_field(&rec, 3, line, "heading")?,
        ));
    }
    let mut path = ReferencePath { poses, arc_step: 0.0 };
    path.arc_step = path.max_spacing();
    Ok(path)
}
