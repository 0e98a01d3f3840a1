use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{Config7, DhRow, RobotConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorPose {
    /// Metres, base frame.
    pub position: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

fn dh(row: &DhRow, theta: f64) -> Isometry3<f64> {
    let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta + row.theta_offset);
    let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), row.alpha);
    Isometry3::from_parts(Translation3::identity(), rz)
        * Isometry3::from_parts(Translation3::new(row.a, 0.0, row.d), rx)
}

fn chain(cfg: &RobotConfig, q: &Config7) -> Vec<Isometry3<f64>> {
    let axis = Vector3::from(cfg.rail_axis);
    let mut t = Isometry3::from_parts(Translation3::from(axis * q[0]), UnitQuaternion::identity());
    let mut out = Vec::with_capacity(7);
    out.push(t);
    for (row, theta) in cfg.dh.iter().zip(&q[1..]) {
        t *= dh(row, *theta);
        out.push(t);
    }
    out
}

/// Flange pose: guide translation along `rail_axis`, then the six DH links.
pub fn forward_kinematics(cfg: &RobotConfig, q: &Config7) -> EndEffectorPose {
    let t = chain(cfg, q)[6];
    let r = t.rotation;
    EndEffectorPose {
        position: [t.translation.x, t.translation.y, t.translation.z],
        orientation: [r.w, r.i, r.j, r.k],
    }
}

/// Origins of the carriage and each link frame, for drawing the arm.
pub fn frame_origins(cfg: &RobotConfig, q: &Config7) -> Vec<[f64; 3]> {
    chain(cfg, q).iter().map(|t| [t.translation.x, t.translation.y, t.translation.z]).collect()
}
