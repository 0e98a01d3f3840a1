//! The robot as a behavior-tree world.
//!
//! Conditions: `gripper_open`, `gripper_closed`, `at_home`, `estopped`.

use super::sim::TrajectoryEnd;
use super::Robot;
use crate::bt::{SkillSpec, SkillState, World};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Pending {
    Trajectory(u64),
    Gripper,
    Until(f64),
    Instant,
}

impl World for Robot {
    fn start_skill(&mut self, skill: &SkillSpec) -> Result<(), String> {
        let pending = match skill {
            SkillSpec::MoveToNamedPose { pose, speed } => {
                Pending::Trajectory(self.move_to_named(pose, *speed).map_err(|e| e.to_string())?)
            }
            SkillSpec::ExecuteTrajectory { trajectory } => {
                Pending::Trajectory(self.execute_named(trajectory).map_err(|e| e.to_string())?)
            }
            SkillSpec::SetGripper { aperture } => {
                self.set_gripper(*aperture);
                Pending::Gripper
            }
            SkillSpec::GuideVelocity { v_nom, decay } => {
                self.retrigger_guide(*v_nom, *decay);
                Pending::Instant
            }
            SkillSpec::EmergencyStop => {
                self.emergency_stop();
                Pending::Instant
            }
            SkillSpec::Wait { seconds } => Pending::Until(self.state().sim_time + seconds),
        };
        self.skill = Some((skill.clone(), pending));
        Ok(())
    }

    fn poll_skill(&mut self, skill: &SkillSpec) -> SkillState {
        let Some((started, pending)) = &self.skill else {
            return SkillState::Fault(format!("{skill} was never started"));
        };
        if started != skill {
            return SkillState::Fault(format!("{skill} is not the active skill"));
        }
        match *pending {
            Pending::Trajectory(id) => match self.last_end {
                _ if self.active_trajectory_id() == Some(id) => SkillState::InProgress,
                Some((end, TrajectoryEnd::Finished)) if end == id => SkillState::Done,
                _ => SkillState::Fault(format!("{skill} was interrupted")),
            },
            Pending::Gripper => {
                if self.state().gripper == self.state().gripper_target {
                    SkillState::Done
                } else {
                    SkillState::InProgress
                }
            }
            Pending::Until(t) => {
                if self.state().sim_time >= t - 1e-9 {
                    SkillState::Done
                } else {
                    SkillState::InProgress
                }
            }
            Pending::Instant => SkillState::Done,
        }
    }

    fn condition(&mut self, predicate: &str) -> Result<bool, String> {
        let s = self.state();
        match predicate {
            "gripper_open" => Ok(s.gripper >= 0.99),
            "gripper_closed" => Ok(s.gripper <= 0.01),
            "estopped" => Ok(s.estopped),
            "at_home" => {
                let home = self.config().poses[&self.config().home_pose];
                Ok(self.q().iter().zip(home).all(|(a, b)| (a - b).abs() < 1e-6))
            }
            other => Err(format!("unknown condition {other:?}")),
        }
    }

    fn halt(&mut self) {
        self.emergency_stop();
    }
}
