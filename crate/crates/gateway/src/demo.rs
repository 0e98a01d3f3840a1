//! Headless scripted runs of the pick-and-place and pouring playlists.
//!
//! Each gesture of the playlist is played through the synthetic radar once
//! the cell is quiet. Like an operator watching the cell, the driver repeats
//! a gesture that launched no tree (no window, `no_gesture`, low confidence
//! or a class without a binding), up to `max_attempts` plays. A gesture that
//! launches the wrong tree is not repeated; the run then fails on its tree
//! sequence.

use std::time::{Duration, Instant};

use gesture_cell::bt::{Dispatch, Outcome, SkillRecord, TickStatus};
use gesture_cell::net::Checkpoint;
use gesture_cell::synth::{Environment, GestureClass};
use serde::Serialize;

use crate::messages::{Command, EventSource};
use crate::session::{PipelineConfig, Session};
use crate::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DemoKind {
    /// Pick and place.
    Test1,
    /// Pick a glass and a bottle, pour, put both down.
    Test3,
}

impl DemoKind {
    pub fn preset(self) -> &'static str {
        match self {
            DemoKind::Test1 => "test1",
            DemoKind::Test3 => "test3",
        }
    }

    pub fn playlist(self) -> &'static [GestureClass] {
        use GestureClass::*;
        match self {
            DemoKind::Test1 => &[SwipeRight, SwipeCCW, Down, SwipeCW, SwipeLeft, S, Up],
            DemoKind::Test3 => &[SwipeRight, Down, SwipeLeft, Z, X, SwipeCW, SwipeCCW, Up],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoConfig {
    pub kind: DemoKind,
    pub environment: Environment,
    pub seed: u64,
    pub max_attempts: usize,
    /// Simulation time allowed for one tree to finish, s.
    pub tree_timeout: f64,
}

impl DemoConfig {
    pub fn new(kind: DemoKind, environment: Environment, seed: u64) -> Self {
        Self { kind, environment, seed, max_attempts: 3, tree_timeout: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub gesture: GestureClass,
    pub attempts: usize,
    /// Class names of the radar events seen for this step.
    pub recognized: Vec<String>,
    pub tree: Option<String>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub kind: DemoKind,
    pub environment: Environment,
    pub seed: u64,
    pub steps: Vec<StepReport>,
    pub expected_trees: Vec<String>,
    pub executed_trees: Vec<String>,
    /// `tree/skill:status` for every skill of every execution, in order.
    pub skill_sequence: Vec<String>,
    pub all_success: bool,
    pub at_home: bool,
    pub sim_time: f64,
    pub wall_time: Duration,
}

impl DemoReport {
    /// Plays beyond the first, over all steps.
    pub fn repeats(&self) -> usize {
        self.steps.iter().map(|s| s.attempts.saturating_sub(1)).sum()
    }

    pub fn passed(&self) -> bool {
        self.all_success && self.at_home && self.executed_trees == self.expected_trees
    }
}

pub fn run_demo(config: &DemoConfig, checkpoint: Checkpoint) -> Result<DemoReport, GatewayError> {
    let started = Instant::now();
    let pipeline = PipelineConfig::synthetic(config.kind.preset(), config.environment, config.seed);
    let mut session = Session::with_classifier(pipeline, Some(checkpoint))?;
    let expected_trees: Vec<String> = config
        .kind
        .playlist()
        .iter()
        .map(|g| session.engine().table().tree_for(*g).map_or_else(|| "<unbound>".to_string(), |(id, _)| id.to_string()))
        .collect();

    let mut steps = Vec::new();
    for &gesture in config.kind.playlist() {
        let mut step = StepReport { gesture, attempts: 0, recognized: Vec::new(), tree: None, outcome: None };
        while step.attempts < config.max_attempts {
            step.attempts += 1;
            settle(&mut session, config.tree_timeout)?;
            let seen = session.events().len();
            session.handle_command(&Command::PlayGesture { class: gesture.name().into() }).map_err(|e| {
                GatewayError::Config(format!("play_gesture rejected: {}", e.message))
            })?;
            wait_for_source(&mut session)?;
            let fresh: Vec<_> = session.events()[seen..].iter().filter(|e| e.source == EventSource::Radar).cloned().collect();
            step.recognized.extend(fresh.iter().map(|e| e.class.clone()));
            let launched = fresh.iter().find_map(|e| match &e.dispatch {
                Some(Dispatch::Launched { tree }) => Some(tree.clone()),
                Some(Dispatch::EmergencyStop { tree, .. }) => Some(tree.clone()),
                _ => None,
            });
            if let Some(tree) = launched {
                step.tree = Some(tree);
                settle(&mut session, config.tree_timeout)?;
                step.outcome =
                    session.engine().history().iter().rev().find(|r| Some(&r.tree) == step.tree.as_ref()).map(|r| r.outcome);
                break;
            }
        }
        steps.push(step);
    }
    settle(&mut session, config.tree_timeout)?;

    let history = session.engine().history();
    let executed_trees: Vec<String> = history.iter().map(|r| r.tree.clone()).collect();
    let skill_sequence = history
        .iter()
        .flat_map(|r| r.skills.iter().map(move |s: &SkillRecord| format!("{}/{}:{}", r.tree, s.skill, status_name(s.status))))
        .collect();
    let all_success = !history.is_empty() && history.iter().all(|r| r.outcome == Outcome::Success);
    let robot = session.robot();
    let home = robot.config().poses[&robot.config().home_pose];
    let at_home = robot.q().iter().zip(home).all(|(a, b)| (a - b).abs() < 1e-6) && !robot.is_moving();
    Ok(DemoReport {
        kind: config.kind,
        environment: config.environment,
        seed: config.seed,
        steps,
        expected_trees,
        executed_trees,
        skill_sequence,
        all_success,
        at_home,
        sim_time: session.time(),
        wall_time: started.elapsed(),
    })
}

fn status_name(s: TickStatus) -> &'static str {
    match s {
        TickStatus::Success => "success",
        TickStatus::Failure => "failure",
        TickStatus::Running => "running",
    }
}

/// Ticks until nothing is running, in flight or buffered.
fn settle(session: &mut Session, timeout: f64) -> Result<(), GatewayError> {
    let limit = session.time() + timeout;
    while !session.is_quiet() {
        if session.time() > limit {
            return Err(GatewayError::Timeout(format!("cell not idle after {timeout} s")));
        }
        session.tick()?;
        session.drain();
    }
    Ok(())
}

/// Ticks until the played gesture has left the radar and the segmenter has
/// closed any window it opened.
fn wait_for_source(session: &mut Session) -> Result<(), GatewayError> {
    let limit = session.time() + 10.0;
    loop {
        session.tick()?;
        session.drain();
        if session.is_source_idle() && session.is_segmenter_idle() {
            return Ok(());
        }
        if session.time() > limit {
            return Err(GatewayError::Timeout("played gesture never finished".into()));
        }
    }
}
