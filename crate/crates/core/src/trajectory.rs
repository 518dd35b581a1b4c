//! Crowdsourced trajectories: synthetic generation through a layout and CSV
//! ingestion of recorded passes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::ops::Deref;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::workzone::WorkZoneLayout;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub pos: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub vehicle_id: String,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.points.iter().map(|p| p.pos)
    }

    /// Largest distance between consecutive points.
    pub fn max_gap(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].pos - w[0].pos).norm())
            .fold(0.0, f64::max)
    }
}

/// Unordered bag of finite 2D points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSet(Vec<Vec2>);

impl PointSet {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidParam(format!("non-finite point {p:?}")));
        }
        Ok(Self(points))
    }

    pub fn into_inner(self) -> Vec<Vec2> {
        self.0
    }
}

impl Deref for PointSet {
    type Target = [Vec2];

    fn deref(&self) -> &[Vec2] {
        &self.0
    }
}

impl FromIterator<Vec2> for PointSet {
    fn from_iter<I: IntoIterator<Item = Vec2>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn flatten(trajectories: &[Trajectory]) -> PointSet {
    trajectories.iter().flat_map(|t| t.positions()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n: usize,
    pub lateral_sigma: f64,
    pub step: f64,
    pub seed: u64,
    /// Nominal travel speed used to stamp times.
    pub speed: f64,
    /// Decorrelation length of the lateral wander.
    pub correlation_length: f64,
    /// Noise is clipped to this many standard deviations.
    pub clip_sigmas: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n: 30,
            lateral_sigma: 0.3,
            step: 2.0,
            seed: 7,
            speed: 10.0,
            correlation_length: 10.0,
            clip_sigmas: 2.0,
        }
    }
}

fn cosine_ramp(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    0.5 * (1.0 - (PI * u).cos())
}

/// Lateral position of the nominal crowd path at station `x`.
///
/// Vehicles start in the first closed lane, shift into the adjacent open lane
/// with a cosine ramp centered on the start of the merging taper, and shift
/// back with a ramp centered on the end of the shifting taper.
pub fn nominal_lateral(layout: &WorkZoneLayout, x: f64) -> f64 {
    let s = &layout.stations;
    let shift = layout.closed_lane_center() - layout.open_lane_center();
    let merge_span = s.merge_end - s.merge_start;
    let return_span = s.shift_end - s.activity_end;
    let merge = cosine_ramp((x - (s.merge_start - merge_span / 2.0)) / merge_span);
    let back = cosine_ramp((x - (s.shift_end - return_span / 2.0)) / return_span);
    layout.closed_lane_center() - shift * merge + shift * back
}

/// Dense polyline of the nominal crowd path between `x0` and `x1`.
pub fn nominal_path(layout: &WorkZoneLayout, x0: f64, x1: f64, dx: f64) -> Vec<Vec2> {
    let n = ((x1 - x0) / dx).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / n as f64;
            Vec2::new(x, nominal_lateral(layout, x))
        })
        .collect()
}

/// Resample a polyline at uniform arc length, returning `(s, point, unit tangent)`.
fn arc_samples(line: &[Vec2], step: f64) -> Vec<(f64, Vec2, Vec2)> {
    let mut cum = Vec::with_capacity(line.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in line.windows(2) {
        acc += (w[1] - w[0]).norm();
        cum.push(acc);
    }
    let total = acc;
    let count = (total / step).floor() as usize;
    let mut out = Vec::with_capacity(count + 1);
    let mut seg = 0;
    for i in 0..=count {
        let s = i as f64 * step;
        while seg + 2 < line.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let (a, b) = (line[seg], line[seg + 1]);
        let len = cum[seg + 1] - cum[seg];
        let f = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        let tangent = (b - a).normalize();
        out.push((s, a + (b - a) * f.clamp(0.0, 1.0), tangent));
    }
    out
}

/// Synthesize `n` passes through the work zone.
///
/// Each pass follows the nominal crowd path sampled every `step` meters of arc
/// length, offset along the path normal by an AR(1) lateral wander with
/// stationary standard deviation `lateral_sigma`, clipped at
/// `clip_sigmas * lateral_sigma`.
pub fn synthesize(layout: &WorkZoneLayout, params: &SynthParams) -> Result<Vec<Trajectory>> {
    if !(params.step > 0.0) {
        return Err(Error::InvalidParam(format!("step must be > 0, got {}", params.step)));
    }
    if !(params.lateral_sigma >= 0.0) || !(params.speed > 0.0) || !(params.correlation_length > 0.0) {
        return Err(Error::InvalidParam(
            "lateral_sigma must be >= 0; speed and correlation_length > 0".into(),
        ));
    }
    let x0 = layout.stations.road_start + 1.0;
    let x1 = layout.stations.road_end - 1.0;
    let base = arc_samples(&nominal_path(layout, x0, x1, 0.25), params.step);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rho = (-params.step / params.correlation_length).exp();
    let innovation = (1.0 - rho * rho).sqrt();
    let clip = params.clip_sigmas * params.lateral_sigma;

    let trajectories = (0..params.n)
        .map(|v| {
            let mut z: f64 = StandardNormal.sample(&mut rng);
            let points = base
                .iter()
                .map(|&(s, p, tangent)| {
                    let offset = (params.lateral_sigma * z).clamp(-clip, clip);
                    let e: f64 = StandardNormal.sample(&mut rng);
                    z = rho * z + innovation * e;
                    let normal = Vec2::new(-tangent.y, tangent.x);
                    // Back onto the exact curve; the chord error is a few microns.
                    let on_curve = Vec2::new(p.x, nominal_lateral(layout, p.x));
                    TrajectoryPoint {
                        t: s / params.speed,
                        pos: on_curve + normal * offset,
                    }
                })
                .collect();
            Trajectory {
                vehicle_id: format!("v{v:03}"),
                points,
            }
        })
        .collect();
    Ok(trajectories)
}

pub fn save_csv(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
    let mut out = String::from("vehicle_id,t,x,y\n");
    for traj in sorted {
        let mut pts = traj.points.clone();
        pts.sort_by(|a, b| a.t.total_cmp(&b.t));
        for p in pts {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                traj.vehicle_id, p.t, p.pos.x, p.pos.y
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_field(rec: &csv::StringRecord, i: usize, line: u64, name: &str) -> Result<f64> {
    let raw = rec.get(i).ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing column {name}"),
    })?;
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} value {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite {name}"),
        });
    }
    Ok(v)
}

/// Load trajectories from `vehicle_id,t,x,y` CSV. Vehicles keep their order of
/// first appearance; points are sorted by time.
pub fn load_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<(u64, TrajectoryPoint)>> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let id = rec[0].trim().to_string();
        let t = parse_field(&rec, 1, line, "t")?;
        let x = parse_field(&rec, 2, line, "x")?;
        let y = parse_field(&rec, 3, line, "y")?;
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push((line, TrajectoryPoint { t, pos: Vec2::new(x, y) }));
    }
    order
        .into_iter()
        .map(|id| {
            let mut pts = groups.remove(&id).unwrap_or_default();
            pts.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
            if let Some(w) = pts.windows(2).find(|w| w[1].1.t <= w[0].1.t) {
                return Err(Error::Parse {
                    line: w[1].0,
                    msg: format!("duplicate timestamp {} for vehicle {id}", w[1].1.t),
                });
            }
            Ok(Trajectory {
                vehicle_id: id,
                points: pts.into_iter().map(|(_, p)| p).collect(),
            })
        })
        .collect()
}

pub fn save_points_csv(points: &[Vec2], path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::from("x,y\n");
    for p in points {
        out.push_str(&format!("{:.6},{:.6}\n", p.x, p.y));
    }
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_points_csv(path: &Path) -> Result<PointSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        points.push(Vec2::new(
            parse_field(&rec, 0, line, "x")?,
            parse_field(&rec, 1, line, "y")?,
        ));
    }
    PointSet::new(points)
}
