//! Precision, clearance and rule-violation scoring of a scenario run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{point_polyline_distance, Vec2};
use crate::gridmap::OccupancyGrid;
use crate::vehicle::Trace;
use crate::workzone::WorkZoneLayout;
use crate::{Error, Result};

pub use crate::gridmap::precision;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceSample {
    pub t: f64,
    pub x: f64,
    /// Left vehicle edge to the cone line; absent without cones.
    pub cone: Option<f64>,
    /// Right vehicle edge to the outer road boundary.
    pub boundary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceReport {
    pub min_cone_distance: Option<f64>,
    pub min_boundary_distance: Option<f64>,
    /// max - min of each series while the vehicle is alongside the activity area.
    pub cone_fluctuation: Option<f64>,
    pub boundary_fluctuation: Option<f64>,
    pub distance_series: Vec<ClearanceSample>,
}

/// Left and right edge points of a vehicle of `width` at the rear-axle pose.
pub fn vehicle_edges(pos: &Vec2, heading: f64, width: f64) -> (Vec2, Vec2) {
    let n = Vec2::new(-heading.sin(), heading.cos()) * (0.5 * width);
    (pos + n, pos - n)
}

fn min_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().reduce(f64::min)
}

fn range_opt(values: impl Iterator<Item = Option<f64>> + Clone) -> Option<f64> {
    let lo = values.clone().flatten().reduce(f64::min)?;
    let hi = values.flatten().reduce(f64::max)?;
    Some(hi - lo)
}

pub fn clearance(trace: &Trace, layout: &WorkZoneLayout, vehicle_width: f64) -> Result<ClearanceReport> {
    if trace.entries.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let series: Vec<ClearanceSample> = trace
        .entries
        .iter()
        .map(|e| {
            let (left, right) = vehicle_edges(&e.state.position(), e.state.heading, vehicle_width);
            ClearanceSample {
                t: e.t,
                x: e.state.x,
                cone: point_polyline_distance(&left, layout.cone_line()),
                boundary: point_polyline_distance(&right, &layout.road_boundary),
            }
        })
        .collect();
    let s = &layout.stations;
    let in_span = series
        .iter()
        .filter(|c| c.x >= s.merge_end && c.x <= s.activity_end);
    Ok(ClearanceReport {
        min_cone_distance: min_opt(series.iter().map(|c| c.cone)),
        min_boundary_distance: min_opt(series.iter().map(|c| c.boundary)),
        cone_fluctuation: range_opt(in_span.clone().map(|c| c.cone)),
        boundary_fluctuation: range_opt(in_span.map(|c| c.boundary)),
        distance_series: series,
    })
}

/// True iff any point lies inside the closed region.
pub fn rule_violation(points: &[Vec2], layout: &WorkZoneLayout) -> bool {
    points.iter().any(|p| layout.in_closed_region(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationParams {
    pub vehicle_width: f64,
    /// Bound on clearance fluctuation along the activity area.
    pub max_fluctuation: f64,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        Self {
            vehicle_width: 1.85,
            max_fluctuation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub precision: f64,
    /// Precision of the obstacle-only map against the same ground truth.
    pub benchmark_precision: f64,
    pub clearance: ClearanceReport,
    pub benchmark_violates: bool,
    pub crowdsourced_violates: bool,
    pub trace_violates: bool,
    pub fluctuation_within_bound: bool,
}

pub struct ScenarioInputs<'a> {
    pub crowd_grid: &'a OccupancyGrid,
    pub bench_grid: &'a OccupancyGrid,
    pub truth_grid: &'a OccupancyGrid,
    pub crowd_path: &'a [Vec2],
    pub bench_path: &'a [Vec2],
    pub trace: &'a Trace,
}

pub fn evaluate_scenario(
    inputs: &ScenarioInputs<'_>,
    layout: &WorkZoneLayout,
    params: &EvaluationParams,
) -> Result<EvaluationReport> {
    let clearance = clearance(inputs.trace, layout, params.vehicle_width)?;
    let within = [clearance.cone_fluctuation, clearance.boundary_fluctuation]
        .iter()
        .flatten()
        .all(|f| *f <= params.max_fluctuation);
    Ok(EvaluationReport {
        precision: precision(inputs.crowd_grid, inputs.truth_grid)?,
        benchmark_precision: precision(inputs.bench_grid, inputs.truth_grid)?,
        benchmark_violates: rule_violation(inputs.bench_path, layout),
        crowdsourced_violates: rule_violation(inputs.crowd_path, layout),
        trace_violates: rule_violation(&inputs.trace.positions(), layout),
        fluctuation_within_bound: within,
        clearance,
    })
}

pub fn save_clearance_csv(report: &ClearanceReport, path: &Path) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |d| format!("{d:.6}"));
    let mut out = String::from("t,x,cone_distance,boundary_distance\n");
    for c in &report.distance_series {
        out.push_str(&format!("{:.6},{:.6},{},{}\n", c.t, c.x, fmt(c.cone), fmt(c.boundary)));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
