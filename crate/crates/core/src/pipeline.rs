//! File-backed pipeline stages. Each stage reads its inputs from the output
//! directory and writes its own artifacts there, so any stage can be re-run
//! on its own.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::evaluation::{evaluate_scenario, save_clearance_csv, EvaluationReport, ScenarioInputs};
use crate::gmm::{sample_gated_with_stats, select_k, FitReport, GaussianMixture, ModelScore, SampleStats};
use crate::gridmap::{self, load_pgm, save_pgm, OccupancyGrid};
use crate::planner::{hybrid_astar, load_path_csv, resample, save_path_csv, Pose, ReferencePath};
use crate::trajectory::{self, flatten, PointSet, Trajectory};
use crate::vehicle::{self, load_trace_csv, save_trace_csv, Trace, VehicleState};
use crate::workzone::{build_layout, ground_truth_grid, WorkZoneLayout};
use crate::{Error, Result};

pub const LAYOUT: &str = "layout.json";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const MIXTURE: &str = "mixture.json";
pub const FIT_REPORT: &str = "fit_report.json";
pub const SAMPLES: &str = "samples.csv";
pub const CROWD_MAP: &str = "crowd_map.pgm";
pub const BENCHMARK_MAP: &str = "benchmark_map.pgm";
pub const CROWD_PATH: &str = "crowd_path.csv";
pub const BENCHMARK_PATH: &str = "benchmark_path.csv";
pub const TRACE: &str = "trace.csv";
pub const REPORT: &str = "report.json";
pub const CLEARANCE: &str = "clearance.csv";

/// Model-selection output written next to the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub k_best: usize,
    pub n_trajectories: usize,
    pub fit: FitReport,
    pub table: Vec<ModelScore>,
}

fn input(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact(p))
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let p = input(dir, name)?;
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn load_layout(dir: &Path) -> Result<WorkZoneLayout> {
    read_json(dir, LAYOUT)
}

pub fn gen_workzone(cfg: &PipelineConfig, dir: &Path) -> Result<WorkZoneLayout> {
    let layout = build_layout(&cfg.workzone)?;
    write_json(&layout, &dir.join(LAYOUT))?;
    Ok(layout)
}

pub fn synth_traj(cfg: &PipelineConfig, dir: &Path) -> Result<Vec<Trajectory>> {
    let layout = load_layout(dir)?;
    let trajectories = trajectory::synthesize(&layout, &cfg.trajectory)?;
    trajectory::save_csv(&trajectories, &dir.join(TRAJECTORIES))?;
    Ok(trajectories)
}

pub fn fit_gmm(cfg: &PipelineConfig, dir: &Path) -> Result<FitSummary> {
    let all = trajectory::load_csv(&input(dir, TRAJECTORIES)?)?;
    let used: Vec<Trajectory> = all.into_iter().take(cfg.gmm.n_trajectories).collect();
    let points = flatten(&used);
    let sel = select_k(&points, cfg.gmm.k_min, cfg.gmm.k_max, &cfg.gmm.em_params())?;
    write_json(&sel.mixture, &dir.join(MIXTURE))?;
    let summary = FitSummary {
        k_best: sel.k_best,
        n_trajectories: used.len(),
        fit: sel.report,
        table: sel.table,
    };
    write_json(&summary, &dir.join(FIT_REPORT))?;
    Ok(summary)
}

pub fn sample(cfg: &PipelineConfig, dir: &Path) -> Result<(PointSet, SampleStats)> {
    let mixture: GaussianMixture = read_json(dir, MIXTURE)?;
    let (points, stats) =
        sample_gated_with_stats(&mixture, cfg.gmm.n_samples, cfg.gmm.confidence, cfg.gmm.sample_seed)?;
    trajectory::save_points_csv(&points, &dir.join(SAMPLES))?;
    Ok((points, stats))
}

pub fn build_map(cfg: &PipelineConfig, dir: &Path) -> Result<OccupancyGrid> {
    let layout = load_layout(dir)?;
    let samples = trajectory::load_points_csv(&input(dir, SAMPLES)?)?;
    let grid = gridmap::from_samples(
        &samples,
        cfg.grid.footprint_side,
        &layout.default_bounds(),
        cfg.grid.resolution,
    );
    save_pgm(&grid, &dir.join(CROWD_MAP))?;
    Ok(grid)
}

pub fn build_benchmark_map(cfg: &PipelineConfig, dir: &Path) -> Result<OccupancyGrid> {
    let layout = load_layout(dir)?;
    let grid = gridmap::from_obstacles(&layout, cfg.grid.cone_radius, &layout.default_bounds(), cfg.grid.resolution);
    save_pgm(&grid, &dir.join(BENCHMARK_MAP))?;
    Ok(grid)
}

/// Start and goal poses: closed-lane centre near both road ends, heading
/// along the road.
pub fn endpoints(cfg: &PipelineConfig, layout: &WorkZoneLayout) -> (Pose, Pose) {
    let s = &layout.stations;
    let y = layout.closed_lane_center();
    (
        Pose::new(s.road_start + cfg.planner.end_margin, y, 0.0),
        Pose::new(s.road_end - cfg.planner.end_margin, y, 0.0),
    )
}

pub fn plan_on(cfg: &PipelineConfig, layout: &WorkZoneLayout, raw: &OccupancyGrid) -> Result<ReferencePath> {
    let grid = gridmap::inflate(raw, cfg.grid.inflation_radius);
    let (start, goal) = endpoints(cfg, layout);
    hybrid_astar(&grid, &start, &goal, cfg.planner.r_min, &cfg.planner.search)
}

pub struct Plans {
    pub crowd: ReferencePath,
    pub benchmark: ReferencePath,
}

pub fn plan(cfg: &PipelineConfig, dir: &Path) -> Result<Plans> {
    let layout = load_layout(dir)?;
    let crowd_raw = load_pgm(&input(dir, CROWD_MAP)?)?;
    let bench_raw = load_pgm(&input(dir, BENCHMARK_MAP)?)?;
    let (crowd, benchmark) = std::thread::scope(|s| {
        let bench = s.spawn(|| plan_on(cfg, &layout, &bench_raw));
        let crowd = plan_on(cfg, &layout, &crowd_raw);
        (crowd, bench.join().expect("planner thread panicked"))
    });
    let (crowd, benchmark) = (crowd?, benchmark?);
    save_path_csv(&crowd, &dir.join(CROWD_PATH))?;
    save_path_csv(&benchmark, &dir.join(BENCHMARK_PATH))?;
    Ok(Plans { crowd, benchmark })
}

pub fn simulate_path(cfg: &PipelineConfig, path: &ReferencePath) -> Result<Trace> {
    let path = resample(path, cfg.simulation.path_step)?;
    let p0 = path.poses[0];
    let start = VehicleState::new(p0.x, p0.y, p0.heading, 0.0);
    vehicle::simulate(&path, &start, &cfg.simulation.vehicle, cfg.simulation.horizon)
}

pub fn simulate(cfg: &PipelineConfig, dir: &Path) -> Result<Trace> {
    let path = load_path_csv(&input(dir, CROWD_PATH)?)?;
    let trace = simulate_path(cfg, &path)?;
    save_trace_csv(&trace, &dir.join(TRACE))?;
    Ok(trace)
}

pub fn evaluate(cfg: &PipelineConfig, dir: &Path) -> Result<EvaluationReport> {
    let layout = load_layout(dir)?;
    let crowd_grid = load_pgm(&input(dir, CROWD_MAP)?)?;
    let bench_grid = load_pgm(&input(dir, BENCHMARK_MAP)?)?;
    let crowd_path = load_path_csv(&input(dir, CROWD_PATH)?)?.positions();
    let bench_path = load_path_csv(&input(dir, BENCHMARK_PATH)?)?.positions();
    let trace = load_trace_csv(&input(dir, TRACE)?)?;
    let truth_grid = ground_truth_grid(&layout, &layout.default_bounds(), cfg.grid.resolution);
    let report = evaluate_scenario(
        &ScenarioInputs {
            crowd_grid: &crowd_grid,
            bench_grid: &bench_grid,
            truth_grid: &truth_grid,
            crowd_path: &crowd_path,
            bench_path: &bench_path,
            trace: &trace,
        },
        &layout,
        &cfg.evaluation,
    )?;
    write_json(&report, &dir.join(REPORT))?;
    save_clearance_csv(&report.clearance, &dir.join(CLEARANCE))?;
    Ok(report)
}
