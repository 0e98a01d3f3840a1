//! Kinematic simulation of a 6-joint arm on a linear guide.
//!
//! Axis 0 of every configuration vector is the guide position in metres,
//! axes 1..=6 are the arm joints in radians.

mod config;
mod guide;
mod kinematics;
mod sim;
mod skills;
mod trajectory;

pub use config::{DhRow, ProximityModel, RobotConfig, TimedPoint};
pub use guide::{guide_velocity, lambda, lambda_integral, GuideVelocityState};
pub use kinematics::{forward_kinematics, frame_origins, EndEffectorPose};
pub use sim::{ActiveTrajectory, Robot, RobotState};
pub use trajectory::{plan_trajectory, Trajectory, Waypoint};

/// Guide plus six joints.
pub const AXES: usize = 7;
pub type Config7 = [f64; AXES];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RobotError {
    #[error("invalid robot config: {0}")]
    Config(String),
    #[error("axis {axis} target {value} outside [{min}, {max}]")]
    OutOfLimits { axis: usize, value: f64, min: f64, max: f64 },
    #[error("unknown pose {0:?}")]
    UnknownPose(String),
    #[error("unknown trajectory {0:?}")]
    UnknownTrajectory(String),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("speed fraction {0} outside (0, 1]")]
    SpeedFraction(f64),
}
