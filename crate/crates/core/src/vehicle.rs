//! Kinematic bicycle model tracked by PID speed control and pure-pursuit
//! steering.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Vec2};
use crate::planner::ReferencePath;
use crate::trajectory::parse_field;
use crate::{Error, Result};

/// Errors kept by the windowed integral.
pub const PID_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Rear-axle centre.
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self { x, y, heading, speed }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub width: f64,
    /// Radians.
    pub max_steer: f64,
    pub l_dmin: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub v_ref: f64,
    pub dt: f64,
    /// Acceleration at full throttle, m/s^2.
    pub a_max: f64,
    /// Deceleration at full brake, m/s^2.
    pub b_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 4.6391,
            width: 1.85,
            max_steer: PI / 6.0,
            l_dmin: 3.0,
            kp: 0.5,
            ki: 0.018,
            kd: 0.4,
            v_ref: 10.0,
            dt: 0.05,
            a_max: 2.0,
            b_max: 2.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wheelbase", self.wheelbase),
            ("width", self.width),
            ("max_steer", self.max_steer),
            ("l_dmin", self.l_dmin),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.a_max >= 0.0 && self.b_max >= 0.0 && self.v_ref >= 0.0) {
            return Err(Error::InvalidParam("a_max, b_max and v_ref must be >= 0".into()));
        }
        Ok(())
    }

    /// Turning radius at full lock.
    pub fn min_turning_radius(&self) -> f64 {
        self.wheelbase / self.max_steer.tan()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

/// Speed PID whose integral only covers the most recent errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    history: VecDeque<f64>,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            history: VecDeque::with_capacity(PID_WINDOW),
            prev_error: None,
        }
    }

    pub fn history(&self) -> &VecDeque<f64> {
        &self.history
    }

    pub fn integral_term(&self, dt: f64) -> f64 {
        self.ki * self.history.iter().sum::<f64>() * dt
    }

    /// Signed command for the error `v_ref - v`. The derivative is zero on
    /// the first call.
    pub fn update(&mut self, v_ref: f64, v: f64, dt: f64) -> f64 {
        let e = v_ref - v;
        if self.history.len() == PID_WINDOW {
            self.history.pop_front();
        }
        self.history.push_back(e);
        let derivative = self.prev_error.map_or(0.0, |p| (e - p) / dt);
        self.prev_error = Some(e);
        self.kp * e + self.integral_term(dt) + self.kd * derivative
    }
}

/// Splits a signed command into mutually exclusive throttle and brake.
pub fn split_command(u: f64) -> (f64, f64) {
    if u > 0.0 {
        (u.min(1.0), 0.0)
    } else if u < 0.0 {
        (0.0, (-u).min(1.0))
    } else {
        (0.0, 0.0)
    }
}

/// `atan(2 L sin(alpha) / l_d)`, unclipped.
pub fn pure_pursuit_law(alpha: f64, l_d: f64, wheelbase: f64) -> f64 {
    (2.0 * wheelbase * alpha.sin() / l_d).atan()
}

/// Pure-pursuit tracker that remembers the nearest path index so it never
/// snaps backwards along the path.
#[derive(Debug, Clone)]
pub struct PurePursuit<'a> {
    path: &'a ReferencePath,
    s: Vec<f64>,
    nearest: usize,
}

impl<'a> PurePursuit<'a> {
    pub fn new(path: &'a ReferencePath) -> Result<Self> {
        if path.is_empty() {
            return Err(Error::EmptyPath);
        }
        Ok(Self {
            path,
            s: path.arc_lengths(),
            nearest: 0,
        })
    }

    pub fn nearest_index(&self) -> usize {
        self.nearest
    }

    pub fn remaining(&self) -> f64 {
        self.s[self.s.len() - 1] - self.s[self.nearest]
    }

    fn update_nearest(&mut self, p: &Vec2, window: f64) {
        let base = self.s[self.nearest];
        let mut best = (self.path.poses[self.nearest].position() - p).norm();
        for i in self.nearest + 1..self.path.len() {
            if self.s[i] - base > window {
                break;
            }
            let d = (self.path.poses[i].position() - p).norm();
            if d < best {
                best = d;
                self.nearest = i;
            }
        }
    }

    /// Returns the lookahead index and the steering angle, clipped to
    /// `max_steer`.
    pub fn steer(&mut self, state: &VehicleState, l_dmin: f64, wheelbase: f64, max_steer: f64) -> (usize, f64) {
        let p = state.position();
        self.update_nearest(&p, (4.0 * l_dmin).max(10.0));
        let s0 = self.s[self.nearest];
        let target = (self.nearest..self.path.len())
            .find(|&i| self.s[i] - s0 >= l_dmin)
            .unwrap_or(self.path.len() - 1);
        let t = self.path.poses[target].position();
        let l_d = (t - p).norm();
        if l_d == 0.0 {
            return (target, 0.0);
        }
        let alpha = normalize_angle((t.y - p.y).atan2(t.x - p.x) - state.heading);
        let delta = pure_pursuit_law(alpha, l_d, wheelbase);
        (target, delta.clamp(-max_steer, max_steer))
    }
}

/// Stateless steering from the nearest pose over the whole path.
pub fn pure_pursuit_steer(state: &VehicleState, path: &ReferencePath, params: &VehicleParams) -> Result<f64> {
    let mut tracker = PurePursuit::new(path)?;
    tracker.update_nearest(&state.position(), f64::INFINITY);
    Ok(tracker.steer(state, params.l_dmin, params.wheelbase, params.max_steer).1)
}

pub fn bicycle_step(state: &VehicleState, cmd: &ControlCommand, params: &VehicleParams) -> VehicleState {
    let dt = params.dt;
    let a = cmd.throttle * params.a_max - cmd.brake * params.b_max;
    VehicleState {
        x: state.x + state.speed * state.heading.cos() * dt,
        y: state.y + state.speed * state.heading.sin() * dt,
        heading: normalize_angle(state.heading + state.speed / params.wheelbase * cmd.steer.tan() * dt),
        speed: (state.speed + a * dt).max(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    pub state: VehicleState,
    pub command: ControlCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    /// Whether the vehicle came within the stop distance of the path end.
    pub completed: bool,
}

impl Trace {
    pub fn positions(&self) -> Vec<Vec2> {
        self.entries.iter().map(|e| e.state.position()).collect()
    }
}

/// Distance to the path end at which the run counts as finished.
pub const STOP_DISTANCE: f64 = 1.0;

/// Fixed-step closed-loop run. Entry `k` holds the state at `t = k dt` and
/// the command computed from it.
pub fn simulate(path: &ReferencePath, start: &VehicleState, params: &VehicleParams, horizon: f64) -> Result<Trace> {
    params.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidParam(format!("horizon must be > 0, got {horizon}")));
    }
    let mut tracker = PurePursuit::new(path)?;
    let end = path.poses[path.len() - 1].position();
    let steps = (horizon / params.dt).round() as usize;
    let mut pid = Pid::new(params.kp, params.ki, params.kd);
    let mut state = *start;
    let mut entries = Vec::with_capacity(steps + 1);
    let mut completed = false;
    for k in 0..=steps {
        let (_, steer) = tracker.steer(&state, params.l_dmin, params.wheelbase, params.max_steer);
        let (throttle, brake) = split_command(pid.update(params.v_ref, state.speed, params.dt));
        let command = ControlCommand { throttle, brake, steer };
        entries.push(TraceEntry {
            t: k as f64 * params.dt,
            state,
            command,
        });
        if (state.position() - end).norm() <= STOP_DISTANCE && tracker.remaining() <= 2.0 * STOP_DISTANCE {
            completed = true;
            break;
        }
        state = bicycle_step(&state, &command, params);
    }
    Ok(Trace { entries, completed })
}

pub fn save_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = String::from("t,x,y,heading,speed,throttle,brake,steer\n");
    for e in &trace.entries {
        let (s, c) = (&e.state, &e.command);
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            e.t, s.x, s.y, s.heading, s.speed, c.throttle, c.brake, c.steer
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_trace_csv(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut entries = Vec::new();
    let names = ["t", "x", "y", "heading", "speed", "throttle", "brake", "steer"];
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 8];
        for (i, name) in names.iter().enumerate() {
            v[i] = parse_field(&rec, i, line, name)?;
        }
        entries.push(TraceEntry {
            t: v[0],
            state: VehicleState::new(v[1], v[2], v[3], v[4]),
            command: ControlCommand {
                throttle: v[5],
                brake: v[6],
                steer: v[7],
            },
        });
    }
    Ok(Trace {
        entries,
        completed: false,
    })
}
