use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Config7, RobotError, AXES};
use crate::bt::Catalog;

/// Standard Denavit-Hartenberg row: `Rz(θ + theta_offset) Tz(d) Tx(a) Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProximityModel {
    pub d_stop: f64,
    pub d_full: f64,
}

impl Default for ProximityModel {
    fn default() -> Self {
        Self { d_stop: 0.3, d_full: 1.2 }
    }
}

impl ProximityModel {
    /// 0 at or inside `d_stop`, 1 at or beyond `d_full`, linear between.
    pub fn scale(&self, distance: f64) -> f64 {
        if distance <= self.d_stop {
            0.0
        } else if distance >= self.d_full {
            1.0
        } else {
            (distance - self.d_stop) / (self.d_full - self.d_stop)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub t: f64,
    pub q: Config7,
}

/// Cell description. [`RobotConfig::default`] loads the shipped
/// `presets/robot.json` (UR5 on a 2 m rail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    /// Simulation step, s.
    pub step: f64,
    pub rail_length: f64,
    /// Unit vector of guide travel in the base frame.
    pub rail_axis: [f64; 3],
    pub joint_limits: [[f64; 2]; 6],
    pub v_max: Config7,
    pub a_max: Config7,
    /// Aperture fraction per second.
    pub gripper_rate: f64,
    /// Time for the speed scale to ramp from 1 to 0, s.
    pub stop_ramp: f64,
    pub proximity: ProximityModel,
    pub dh: [DhRow; 6],
    pub initial: Config7,
    pub home_pose: String,
    pub poses: BTreeMap<String, Config7>,
    #[serde(default)]
    pub trajectories: BTreeMap<String, Vec<TimedPoint>>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self::from_json(include_str!("../../presets/robot.json")).expect("shipped robot config is valid")
    }
}

impl RobotConfig {
    pub fn from_json(text: &str) -> Result<Self, RobotError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| RobotError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `[min, max]` per axis.
    pub fn limits(&self) -> [[f64; 2]; AXES] {
        let mut out = [[0.0, self.rail_length]; AXES];
        out[1..].copy_from_slice(&self.joint_limits);
        out
    }

    pub fn check_limits(&self, q: &Config7) -> Result<(), RobotError> {
        for (axis, (v, [min, max])) in q.iter().zip(self.limits()).enumerate() {
            if !(min..=max).contains(v) {
                return Err(RobotError::OutOfLimits { axis, value: *v, min, max });
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Catalog {
        Catalog { poses: self.poses.keys().cloned().collect(), trajectories: self.trajectories.keys().cloned().collect() }
    }

    pub fn validate(&self) -> Result<(), RobotError> {
        let bad = |m: &str| Err(RobotError::Config(m.to_string()));
        if !(self.step > 0.0) || !(self.rail_length > 0.0) || !(self.gripper_rate > 0.0) || !(self.stop_ramp > 0.0) {
            return bad("step, rail_length, gripper_rate and stop_ramp must be positive");
        }
        let norm = self.rail_axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return bad("rail_axis must be a unit vector");
        }
        if !(0.0 < self.proximity.d_stop && self.proximity.d_stop < self.proximity.d_full) {
            return bad("proximity needs 0 < d_stop < d_full");
        }
        for [min, max] in self.joint_limits {
            if !(min < max) || min < -TAU - 1e-12 || max > TAU + 1e-12 {
                return bad("joint limits must satisfy -2π <= min < max <= 2π");
            }
        }
        if self.v_max.iter().chain(&self.a_max).any(|v| !(*v > 0.0)) {
            return bad("v_max and a_max must be positive");
        }
        self.check_limits(&self.initial)?;
        if !self.poses.contains_key(&self.home_pose) {
            return Err(RobotError::UnknownPose(self.home_pose.clone()));
        }
        for q in self.poses.values() {
            self.check_limits(q)?;
        }
        for (name, points) in &self.trajectories {
            if points.is_empty() {
                return Err(RobotError::Trajectory(format!("{name} has no points")));
            }
            if points.windows(2).any(|w| !(w[1].t > w[0].t)) || points[0].t != 0.0 {
                return Err(RobotError::Trajectory(format!("{name}: times must start at 0 and increase")));
            }
            for p in points {
                self.check_limits(&p.q)?;
            }
        }
        Ok(())
    }
}
