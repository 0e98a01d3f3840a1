use serde::{Deserialize, Serialize};

use super::{BindingTable, SkillRecord, TickStatus, Tree, World};
use crate::net::DEFAULT_CONFIDENCE_THRESHOLD;
use crate::synth::GestureClass;

pub const DEFAULT_TICK_HZ: f64 = 20.0;

/// What [`Engine::on_gesture`] did with a gesture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum Dispatch {
    BelowThreshold,
    Unbound,
    /// Another tree is running.
    Rejected { running: String },
    Launched { tree: String },
    /// An emergency-stop binding fired, aborting `aborted` if a tree was
    /// running.
    EmergencyStop { tree: String, aborted: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub tree: String,
    pub gesture: GestureClass,
    pub outcome: Outcome,
    pub skills: Vec<SkillRecord>,
}

#[derive(Debug, Clone)]
struct Running {
    tree: Tree,
    gesture: GestureClass,
    status: TickStatus,
}

/// Launches bound trees on gestures and ticks at most one of them at a time.
#[derive(Debug, Clone)]
pub struct Engine {
    table: BindingTable,
    threshold: f64,
    tick_hz: f64,
    running: Option<Running>,
    history: Vec<ExecutionRecord>,
    log: Vec<String>,
}

impl Engine {
    pub fn new(table: BindingTable) -> Self {
        let threshold = table.confidence_threshold.unwrap_or(DEFAULT_CONFIDENCE_THRESHOLD);
        Self { table, threshold, tick_hz: DEFAULT_TICK_HZ, running: None, history: Vec::new(), log: Vec::new() }
    }

    pub fn table(&self) -> &BindingTable {
        &self.table
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    pub fn tick_hz(&self) -> f64 {
        self.tick_hz
    }

    pub fn is_running(&self) -> bool {
        self.running.is_some()
    }

    /// Finished executions, oldest first.
    pub fn history(&self) -> &[ExecutionRecord] {
        &self.history
    }

    /// Human-readable notes about rejected or ignored gestures.
    pub fn log(&self) -> &[String] {
        &self.log
    }

    /// Tree id, node path and last status of the running tree.
    pub fn status(&self) -> Option<(&str, String, TickStatus)> {
        self.running.as_ref().map(|r| (r.tree.id(), r.tree.node_path(), r.status))
    }

    pub fn on_gesture<W: World + ?Sized>(&mut self, gesture: GestureClass, confidence: f64, world: &mut W) -> Dispatch {
        if confidence < self.threshold {
            return Dispatch::BelowThreshold;
        }
        let Some((id, spec)) = self.table.tree_for(gesture) else {
            self.log.push(format!("{gesture}: no binding"));
            return Dispatch::Unbound;
        };
        let (id, spec) = (id.to_string(), spec.clone());
        if self.table.is_estop(gesture) {
            let aborted = self.running.as_ref().map(|r| r.tree.id().to_string());
            self.abort(world);
            self.launch(id.clone(), &spec, gesture, world);
            return Dispatch::EmergencyStop { tree: id, aborted };
        }
        if let Some(r) = &self.running {
            let running = r.tree.id().to_string();
            self.log.push(format!("{gesture}: rejected while {running} runs"));
            return Dispatch::Rejected { running };
        }
        self.launch(id.clone(), &spec, gesture, world);
        Dispatch::Launched { tree: id }
    }

    /// One engine tick. Returns the record of a tree that finished on it.
    pub fn tick<W: World + ?Sized>(&mut self, world: &mut W) -> Option<ExecutionRecord> {
        let r = self.running.as_mut()?;
        r.status = r.tree.tick(world);
        self.settle()
    }

    /// Stops the running tree and commands the robot to stop.
    pub fn abort<W: World + ?Sized>(&mut self, world: &mut W) -> Option<ExecutionRecord> {
        let r = self.running.take()?;
        world.halt();
        let record = ExecutionRecord {
            tree: r.tree.id().to_string(),
            gesture: r.gesture,
            outcome: Outcome::Aborted,
            skills: r.tree.records().to_vec(),
        };
        self.history.push(record.clone());
        Some(record)
    }

    fn launch<W: World + ?Sized>(&mut self, id: String, spec: &super::NodeSpec, gesture: GestureClass, world: &mut W) {
        let tree = Tree::build(&id, spec).expect("validated when the table was parsed");
        self.running = Some(Running { tree, gesture, status: TickStatus::Running });
        self.tick(world);
    }

    fn settle(&mut self) -> Option<ExecutionRecord> {
        let r = self.running.as_ref()?;
        let outcome = match r.status {
            TickStatus::Running => return None,
            TickStatus::Success => Outcome::Success,
            TickStatus::Failure => Outcome::Failure,
        };
        let r = self.running.take().unwrap();
        let record =
            ExecutionRecord { tree: r.tree.id().to_string(), gesture: r.gesture, outcome, skills: r.tree.records().to_vec() };
        self.history.push(record.clone());
        Some(record)
    }
}
