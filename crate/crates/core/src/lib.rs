//! Work-zone drivable-area inference from crowdsourced vehicle trajectories.
//!
//! The pipeline builds a lane-closure layout, synthesizes (or ingests)
//! trajectories through it, fits a 2D Gaussian mixture to the trajectory
//! points, samples the mixture into an inverse occupancy grid, plans a
//! curvature-bounded path over the inflated grid and tracks it with a
//! kinematic bicycle model. The `evaluation` module scores the result against
//! the ground-truth drivable region and an obstacle-only benchmark map.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod gmm;
pub mod gridmap;
pub mod pipeline;
pub mod planner;
pub mod trajectory;
pub mod vehicle;
pub mod workzone;

pub use error::{Error, Result};
pub use geometry::{Rect, Vec2};
