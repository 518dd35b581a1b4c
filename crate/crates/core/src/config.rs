//! Pipeline configuration, read from TOML. Every field has a default, so an
//! empty file is a complete configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::EvaluationParams;
use crate::gmm::EmParams;
use crate::planner::PlannerParams;
use crate::trajectory::SynthParams;
use crate::vehicle::VehicleParams;
use crate::workzone::WorkZoneSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    /// Trajectories used for fitting, taken in file order.
    pub n_trajectories: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub confidence: f64,
    pub n_samples: usize,
    pub sample_seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 5,
            k_min: 1,
            k_max: 20,
            tol: 1e-6,
            max_iter: 500,
            seed: 7,
            confidence: 0.95,
            n_samples: 5000,
            sample_seed: 11,
        }
    }
}

impl GmmConfig {
    pub fn em_params(&self) -> EmParams {
        EmParams {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: f64,
    /// Side of the square stamped free around each sample, m.
    pub footprint_side: f64,
    pub inflation_radius: f64,
    pub cone_radius: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            footprint_side: 2.5,
            inflation_radius: 0.7,
            cone_radius: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub r_min: f64,
    /// Start and goal sit this far inside the road ends, m.
    pub end_margin: f64,
    pub search: PlannerParams,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            r_min: 8.0,
            end_margin: 20.0,
            search: PlannerParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    /// Spacing of the path handed to the controller, m.
    pub path_step: f64,
    pub vehicle: VehicleParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 150.0,
            path_step: 0.5,
            vehicle: VehicleParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workzone: WorkZoneSpec,
    pub trajectory: SynthParams,
    pub gmm: GmmConfig,
    pub grid: GridConfig,
    pub planner: PlannerConfig,
    pub simulation: SimConfig,
    pub evaluation: EvaluationParams,
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML file; the literal `default` yields the built-in config.
    pub fn load(path: &Path) -> Result<Self> {
        if path.as_os_str() == "default" {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable in TOML")
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.trajectory.seed = seed;
        self.gmm.seed = seed;
        self.gmm.sample_seed = seed.wrapping_add(1);
    }

    pub fn validate(&self) -> Result<()> {
        self.workzone.validate()?;
        self.simulation.vehicle.validate()?;
        let g = &self.gmm;
        if g.k_min == 0 || g.k_max < g.k_min {
            return Err(Error::Config(format!("invalid K range {}..={}", g.k_min, g.k_max)));
        }
        if !(g.confidence > 0.0 && g.confidence < 1.0) {
            return Err(Error::Config(format!("confidence must be in (0, 1), got {}", g.confidence)));
        }
        let t = &self.trajectory;
        if !(t.step > 0.0) || !(t.lateral_sigma >= 0.0) {
            return Err(Error::Config("trajectory step must be > 0 and lateral_sigma >= 0".into()));
        }
        let gr = &self.grid;
        if !(gr.resolution > 0.0) || !(gr.footprint_side >= 0.0) || !(gr.inflation_radius >= 0.0) || !(gr.cone_radius >= 0.0) {
            return Err(Error::Config("grid resolution must be > 0 and radii >= 0".into()));
        }
        let p = &self.planner;
        if !(p.r_min > 0.0) || p.search.heading_bins == 0 {
            return Err(Error::Config("r_min and heading_bins must be positive".into()));
        }
        if !(self.simulation.horizon > 0.0) || !(self.simulation.path_step > 0.0) {
            return Err(Error::Config("horizon and path_step must be > 0".into()));
        }
        if !(self.evaluation.vehicle_width > 0.0) {
            return Err(Error::Config("vehicle_width must be > 0".into()));
        }
        Ok(())
    }
}
