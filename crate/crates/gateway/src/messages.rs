//! Wire messages. Every frame on the socket is one JSON object; see
//! [`crate::wire`] for the framing.
//!
//! Client → server:
//! ```json
//! {"kind": "hello", "role": "controller"}
//! {"kind": "command", "id": 7, "command": {"cmd": "set_proximity", "distance": 0.2}}
//! ```
//! Server → client:
//! ```json
//! {"kind": "welcome", "data": {"role": "controller", "preset": "test1_pick_place", ...}}
//! {"kind": "response", "data": {"id": 7, "ok": true, "detail": "proximity 0.2 m"}}
//! {"kind": "gesture", "data": {"channel": "gesture_recognition", "seq": 3, "class": "swipe_right", ...}}
//! {"kind": "telemetry", "data": {"type": "robot_state", "timestamp": 1.25, ...}}
//! ```

use gesture_cell::bt::{Dispatch, ExecutionRecord, TickStatus};
use gesture_cell::radar::FrameDetections;
use gesture_cell::robot::{EndEffectorPose, RobotState};
use gesture_cell::synth::GestureClass;
use serde::{Deserialize, Serialize};

pub const GESTURE_CHANNEL: &str = "gesture_recognition";
pub const NO_GESTURE: &str = "no_gesture";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    /// Classified from radar frames.
    Radar,
    /// `inject_gesture`, no DSP or classifier involved.
    Injected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEventMsg {
    pub channel: String,
    pub seq: u64,
    /// One of the nine gesture names or `"no_gesture"`.
    pub class: String,
    pub confidence: f64,
    /// Simulation time, s.
    pub timestamp: f64,
    pub source: EventSource,
    /// Radar frames of the classified window, `None` for injected events.
    pub frames: Option<[u64; 2]>,
    /// What the behavior-tree engine did with it; `None` for `no_gesture`.
    pub dispatch: Option<Dispatch>,
}

impl GestureEventMsg {
    pub fn gesture(&self) -> Option<GestureClass> {
        self.class.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TelemetryMsg {
    RobotState {
        timestamp: f64,
        state: RobotState,
        end_effector: EndEffectorPose,
        /// Carriage and link frame origins for drawing.
        frames: Vec<[f64; 3]>,
    },
    BtStatus {
        timestamp: f64,
        /// `None` when no tree is running.
        tree: Option<String>,
        node_path: Option<String>,
        status: Option<TickStatus>,
        /// Set on the first status after a tree finished.
        finished: Option<ExecutionRecord>,
    },
    PointCloud {
        timestamp: f64,
        frame: FrameDetections,
    },
    Metrics {
        timestamp: f64,
        /// Frame ingest to gesture event, last emission, ms.
        latency_ms: Option<f64>,
        mean_latency_ms: Option<f64>,
        max_latency_ms: Option<f64>,
        frames_per_s: f64,
        frames_dropped: u64,
        /// Telemetry messages discarded by the server for slow clients.
        telemetry_dropped: u64,
    },
}

impl TelemetryMsg {
    pub fn timestamp(&self) -> f64 {
        match self {
            TelemetryMsg::RobotState { timestamp, .. }
            | TelemetryMsg::BtStatus { timestamp, .. }
            | TelemetryMsg::PointCloud { timestamp, .. }
            | TelemetryMsg::Metrics { timestamp, .. } => *timestamp,
        }
    }

    pub fn stream(&self) -> &'static str {
        match self {
            TelemetryMsg::RobotState { .. } => "robot_state",
            TelemetryMsg::BtStatus { .. } => "bt_status",
            TelemetryMsg::PointCloud { .. } => "point_cloud",
            TelemetryMsg::Metrics { .. } => "metrics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    InjectGesture {
        class: String,
        #[serde(default = "full_confidence")]
        confidence: f64,
    },
    PlayGesture {
        class: String,
    },
    /// `None` clears the tracked person.
    SetProximity {
        distance: Option<f64>,
    },
    Estop,
    ReleaseEstop,
    LoadPreset {
        id: String,
    },
    SetSpeedOverride {
        fraction: f64,
    },
}

fn full_confidence() -> f64 {
    1.0
}

pub const COMMAND_NAMES: [&str; 7] = [
    "inject_gesture",
    "play_gesture",
    "set_proximity",
    "estop",
    "release_estop",
    "load_preset",
    "set_speed_override",
];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::InjectGesture { .. } => "inject_gesture",
            Command::PlayGesture { .. } => "play_gesture",
            Command::SetProximity { .. } => "set_proximity",
            Command::Estop => "estop",
            Command::ReleaseEstop => "release_estop",
            Command::LoadPreset { .. } => "load_preset",
            Command::SetSpeedOverride { .. } => "set_speed_override",
        }
    }

    /// Decodes a command object, telling unknown commands apart from
    /// malformed arguments.
    pub fn from_value(value: serde_json::Value) -> Result<Self, CommandError> {
        let name = match value.get("cmd") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(_) => return Err(CommandError::new(ErrorCode::BadRequest, "\"cmd\" must be a string")),
            None => return Err(CommandError::new(ErrorCode::BadRequest, "missing \"cmd\"")),
        };
        if !COMMAND_NAMES.contains(&name.as_str()) {
            return Err(CommandError::new(ErrorCode::UnknownCommand, format!("unknown command {name:?}")));
        }
        serde_json::from_value(value).map_err(|e| CommandError::new(ErrorCode::BadArguments, format!("{name}: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    UnknownCommand,
    BadArguments,
    /// Valid command the session cannot carry out now.
    Rejected,
    NotController,
    ControllerTaken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {message}")]
pub struct CommandError {
    pub code: ErrorCode,
    pub message: String,
}

impl CommandError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn rejected(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Rejected, message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Observer,
    Controller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientMsg {
    Hello { role: Role },
    Command { id: u64, command: serde_json::Value },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Welcome {
    pub role: Role,
    pub preset: String,
    pub gestures: Vec<String>,
    pub commands: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// Echo of the command id, `None` for protocol-level errors.
    pub id: Option<u64>,
    pub ok: bool,
    pub detail: Option<String>,
    pub error: Option<CommandError>,
}

impl Response {
    pub fn from_result(id: Option<u64>, result: Result<String, CommandError>) -> Self {
        match result {
            Ok(detail) => Self { id, ok: true, detail: Some(detail), error: None },
            Err(e) => Self { id, ok: false, detail: None, error: Some(e) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ServerMsg {
    Welcome(Welcome),
    Response(Response),
    Gesture(GestureEventMsg),
    Telemetry(TelemetryMsg),
}
