//! Behavior trees that turn recognised gestures into robot skills.
//!
//! Trees are built from [`NodeSpec`] descriptions into an arena and ticked
//! against a [`World`], which is the only way a tree touches the robot.
//! Sequence and Fallback nodes remember the child they stopped at while it
//! is Running and start over once they return Success or Failure.

mod config;
mod engine;
mod tree;

pub use config::{load_bindings, preset, BindingTable, Catalog, PRESET_IDS};
pub use engine::{Dispatch, Engine, ExecutionRecord, Outcome, DEFAULT_TICK_HZ};
pub use tree::{NodeSpec, SkillRecord, Tree};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

/// Parameterised robot skill carried by an Action node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SkillSpec {
    /// `speed` scales the planner's velocity limits, in (0, 1].
    MoveToNamedPose { pose: String, speed: f64 },
    /// 0 closed, 1 fully open.
    SetGripper { aperture: f64 },
    ExecuteTrajectory { trajectory: String },
    /// Raised-cosine guide velocity command: `v_nom` m/s decaying to zero
    /// over `decay` s.
    GuideVelocity { v_nom: f64, decay: f64 },
    EmergencyStop,
    Wait { seconds: f64 },
}

impl SkillSpec {
    pub(crate) fn validate(&self) -> Result<(), String> {
        let ok = match self {
            SkillSpec::MoveToNamedPose { speed, .. } => *speed > 0.0 && *speed <= 1.0,
            SkillSpec::SetGripper { aperture } => (0.0..=1.0).contains(aperture),
            SkillSpec::GuideVelocity { v_nom, decay } => v_nom.is_finite() && *decay > 0.0 && decay.is_finite(),
            SkillSpec::Wait { seconds } => *seconds >= 0.0 && seconds.is_finite(),
            SkillSpec::ExecuteTrajectory { .. } | SkillSpec::EmergencyStop => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{self}: parameter out of range"))
        }
    }
}

impl fmt::Display for SkillSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkillSpec::MoveToNamedPose { pose, speed } => write!(f, "move_to_named_pose({pose}, {speed})"),
            SkillSpec::SetGripper { aperture } => write!(f, "set_gripper({aperture})"),
            SkillSpec::ExecuteTrajectory { trajectory } => write!(f, "execute_trajectory({trajectory})"),
            SkillSpec::GuideVelocity { v_nom, decay } => write!(f, "guide_velocity({v_nom}, {decay})"),
            SkillSpec::EmergencyStop => f.write_str("emergency_stop"),
            SkillSpec::Wait { seconds } => write!(f, "wait({seconds})"),
        }
    }
}

/// Progress of a started skill as reported by the world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkillState {
    InProgress,
    Done,
    Fault(String),
}

/// What a tree can do to the outside. At most one skill is in flight at a
/// time since there are no parallel nodes.
pub trait World {
    /// Errors become a Failure of the Action with the message as diagnostic.
    fn start_skill(&mut self, skill: &SkillSpec) -> Result<(), String>;
    fn poll_skill(&mut self, skill: &SkillSpec) -> SkillState;
    fn condition(&mut self, predicate: &str) -> Result<bool, String>;
    /// Commanded stop of the robot. Called when a running tree is aborted.
    fn halt(&mut self);
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BtError {
    #[error("config line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("tree {tree:?}: {message}")]
    InvalidTree { tree: String, message: String },
    #[error("gesture {gesture} is bound to unknown tree {tree:?}")]
    DanglingTree { gesture: String, tree: String },
    #[error("tree {tree:?} references unknown {kind} {id:?}")]
    UnknownResource { tree: String, kind: &'static str, id: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}
