//! JSON binding configs.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "confidence_threshold": 0.8,
//!   "trees": {
//!     "open": { "fallback": [
//!       { "condition": "gripper_open" },
//!       { "action": { "set_gripper": { "aperture": 1.0 } } }
//!     ] }
//!   },
//!   "bindings": { "swipe_ccw": "open" }
//! }
//! ```
//!
//! Every key is optional. Node objects have exactly one of `sequence`,
//! `fallback` (arrays of nodes), `action` (a skill) or `condition` (a
//! predicate id). Skills are `move_to_named_pose {pose, speed}`,
//! `set_gripper {aperture}`, `execute_trajectory {trajectory}`,
//! `guide_velocity {v_nom, decay}`, `wait {seconds}` and the bare string
//! `"emergency_stop"`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BtError, NodeSpec, SkillSpec, Tree};
use crate::synth::GestureClass;

pub const PRESET_IDS: [&str; 4] = ["test1_pick_place", "test3_pour", "test4_estop", "test5_guide_velocity"];

/// Shipped preset text by id. `test1`, `test3`, `test4` and `test5` are
/// accepted as short forms.
pub fn preset(id: &str) -> Result<&'static str, BtError> {
    Ok(match id {
        "test1_pick_place" | "test1" => include_str!("../../presets/test1_pick_place.json"),
        "test3_pour" | "test3" => include_str!("../../presets/test3_pour.json"),
        "test4_estop" | "test4" => include_str!("../../presets/test4_estop.json"),
        "test5_guide_velocity" | "test5" => include_str!("../../presets/test5_guide_velocity.json"),
        _ => return Err(BtError::UnknownPreset(id.to_string())),
    })
}

/// Named pose and trajectory ids a robot can resolve.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    pub poses: BTreeSet<String>,
    pub trajectories: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingTable {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_threshold: Option<f64>,
    #[serde(default)]
    pub trees: BTreeMap<String, NodeSpec>,
    #[serde(default)]
    pub bindings: BTreeMap<GestureClass, String>,
}

impl BindingTable {
    /// Syntax and structure only. Pose and trajectory ids are checked by
    /// [`BindingTable::check_resources`].
    pub fn parse(text: &str) -> Result<Self, BtError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let table: Self = serde_json::from_str(text).map_err(|e| BtError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if let Some(t) = table.confidence_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(BtError::Parse { line: 0, column: 0, message: format!("confidence_threshold {t} outside [0, 1]") });
            }
        }
        for (id, spec) in &table.trees {
            Tree::build(id, spec)?;
        }
        for (gesture, tree) in &table.bindings {
            if !table.trees.contains_key(tree) {
                return Err(BtError::DanglingTree { gesture: gesture.to_string(), tree: tree.clone() });
            }
        }
        Ok(table)
    }

    pub fn check_resources(&self, catalog: &Catalog) -> Result<(), BtError> {
        for (tree, spec) in &self.trees {
            for skill in spec.skills() {
                let missing = match skill {
                    SkillSpec::MoveToNamedPose { pose, .. } if !catalog.poses.contains(pose) => Some(("pose", pose)),
                    SkillSpec::ExecuteTrajectory { trajectory } if !catalog.trajectories.contains(trajectory) => {
                        Some(("trajectory", trajectory))
                    }
                    _ => None,
                };
                if let Some((kind, id)) = missing {
                    return Err(BtError::UnknownResource { tree: tree.clone(), kind, id: id.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn tree_for(&self, gesture: GestureClass) -> Option<(&str, &NodeSpec)> {
        let id = self.bindings.get(&gesture)?;
        self.trees.get(id).map(|spec| (id.as_str(), spec))
    }

    /// Bindings whose tree fires an emergency stop preempt running trees.
    pub fn is_estop(&self, gesture: GestureClass) -> bool {
        self.tree_for(gesture).is_some_and(|(_, spec)| spec.skills().iter().any(|s| **s == SkillSpec::EmergencyStop))
    }
}

/// [`BindingTable::parse`] followed by the resource check.
pub fn load_bindings(text: &str, catalog: &Catalog) -> Result<BindingTable, BtError> {
    let table = BindingTable::parse(text)?;
    table.check_resources(catalog)?;
    Ok(table)
}
