//! The pipeline loop: radar frames in, gesture events, robot motion and
//! telemetry out.
//!
//! One [`Session::tick`] is one robot step. Every `frame_every` ticks a radar
//! frame runs through the DSP chain, the segmenter and, when a window closes,
//! the classifier; the resulting event is dispatched to the behavior-tree
//! engine. The engine ticks every `bt_every` ticks. Commands are applied
//! between ticks.

use std::path::PathBuf;
use std::time::Instant;

use gesture_cell::bt::{self, Dispatch, Engine};
use gesture_cell::net::{Checkpoint, Normalization, Prediction};
use gesture_cell::radar::{extract_frame, DspParams, FrameDetections, RadarConfig};
use gesture_cell::robot::{Robot, RobotConfig};
use gesture_cell::segmenter::{Mode, Segmenter, SegmenterConfig};
use gesture_cell::synth::GestureClass;
use serde::{Deserialize, Serialize};

use crate::log::SessionLogWriter;
use crate::messages::{
    Command, CommandError, ErrorCode, EventSource, GestureEventMsg, ServerMsg, TelemetryMsg, GESTURE_CHANNEL,
    NO_GESTURE,
};
use crate::source::{FrameSource, SourceConfig};
use crate::GatewayError;

pub const DEFAULT_LOOP_HZ: f64 = 100.0;
const METRICS_EVERY_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: SourceConfig,
    pub radar: RadarConfig,
    pub dsp: DspParams,
    pub segmenter: SegmenterConfig,
    /// `None` runs without a classifier: radar windows are dropped and
    /// only injected gestures reach the engine.
    pub checkpoint: Option<PathBuf>,
    /// Binding preset id or alias, e.g. `test1`.
    pub preset: String,
    pub loop_hz: f64,
    /// `None` uses the shipped arm, guide and pose set.
    pub robot: Option<RobotConfig>,
}

impl PipelineConfig {
    pub fn synthetic(preset: &str, environment: gesture_cell::synth::Environment, seed: u64) -> Self {
        Self {
            source: SourceConfig::SyntheticLive { environment, seed },
            radar: RadarConfig::default(),
            dsp: DspParams::default(),
            segmenter: SegmenterConfig::default(),
            checkpoint: None,
            preset: preset.to_string(),
            loop_hz: DEFAULT_LOOP_HZ,
            robot: None,
        }
    }

    /// Loop ticks per radar frame and per engine tick.
    pub fn schedule(&self) -> Result<(u64, u64), GatewayError> {
        let per = |hz_ratio: f64, what: &str| {
            let n = hz_ratio.round();
            if n < 1.0 || (hz_ratio - n).abs() > 1e-6 {
                Err(GatewayError::Config(format!(
                    "loop rate {} Hz is not a whole multiple of the {what} rate",
                    self.loop_hz
                )))
            } else {
                Ok(n as u64)
            }
        };
        if !(self.loop_hz.is_finite() && self.loop_hz > 0.0) {
            return Err(GatewayError::Config(format!("loop rate {} Hz", self.loop_hz)));
        }
        if self.loop_hz * self.radar.frame_period < 1.0 - 1e-9 {
            return Err(GatewayError::Config(format!(
                "loop rate {} Hz is below the radar frame rate {} Hz",
                self.loop_hz,
                1.0 / self.radar.frame_period
            )));
        }
        Ok((
            per(self.loop_hz * self.radar.frame_period, "radar frame")?,
            per(self.loop_hz / bt::DEFAULT_TICK_HZ, "behavior-tree tick")?,
        ))
    }
}

/// Wall-clock latency bookkeeping, frame ingest to gesture event.
#[derive(Debug, Clone, Default)]
struct Latency {
    last: Option<f64>,
    sum: f64,
    count: u64,
    max: f64,
}

pub struct Session {
    config: PipelineConfig,
    frame_every: u64,
    bt_every: u64,
    dt: f64,
    source: FrameSource,
    segmenter: Segmenter,
    classifier: Option<Checkpoint>,
    engine: Engine,
    robot: Robot,
    preset_id: String,
    ticks: u64,
    frame_index: u64,
    seq: u64,
    events: Vec<GestureEventMsg>,
    outbox: Vec<ServerMsg>,
    latency: Latency,
    metrics_frames: u64,
    metrics_clock: Instant,
    log: Option<SessionLogWriter>,
}

impl Session {
    /// Loads the checkpoint named in the config, if any.
    pub fn new(config: PipelineConfig) -> Result<Self, GatewayError> {
        let classifier = match &config.checkpoint {
            Some(path) => Some(
                Checkpoint::load(path)
                    .map_err(|e| GatewayError::Config(format!("checkpoint {}: {e}", path.display())))?,
            ),
            None => None,
        };
        Self::with_classifier(config, classifier)
    }

    /// Uses `classifier` in place of the config's checkpoint path.
    pub fn with_classifier(config: PipelineConfig, classifier: Option<Checkpoint>) -> Result<Self, GatewayError> {
        let (frame_every, bt_every) = config.schedule()?;
        let robot = Robot::new(config.robot.clone().unwrap_or_default())?;
        let text = bt::preset(&config.preset)?;
        let table = bt::load_bindings(text, &robot.config().catalog())?;
        let norm = classifier.as_ref().map_or_else(Normalization::identity, |c| c.normalization);
        let segmenter = Segmenter::new(config.segmenter, norm).map_err(|e| GatewayError::Config(e.to_string()))?;
        let source = FrameSource::open(&config.source, &config.radar)?;
        Ok(Self {
            frame_every,
            bt_every,
            dt: 1.0 / config.loop_hz,
            source,
            segmenter,
            classifier,
            engine: Engine::new(table),
            robot,
            preset_id: config.preset.clone(),
            ticks: 0,
            frame_index: 0,
            seq: 0,
            events: Vec::new(),
            outbox: Vec::new(),
            latency: Latency::default(),
            metrics_frames: 0,
            metrics_clock: Instant::now(),
            log: None,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn robot(&self) -> &Robot {
        &self.robot
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn preset(&self) -> &str {
        &self.preset_id
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Simulation time at the start of the next tick, s.
    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.dt
    }

    pub fn has_classifier(&self) -> bool {
        self.classifier.is_some()
    }

    /// Every gesture event so far, oldest first.
    pub fn events(&self) -> &[GestureEventMsg] {
        &self.events
    }

    /// `true` when no tree runs, the segmenter holds nothing and the source
    /// has no gesture in flight.
    pub fn is_quiet(&self) -> bool {
        !self.engine.is_running() && self.segmenter.mode() == Mode::Idle && self.source.is_idle()
    }

    pub fn is_source_idle(&self) -> bool {
        self.source.is_idle()
    }

    pub fn is_segmenter_idle(&self) -> bool {
        self.segmenter.mode() == Mode::Idle
    }

    pub fn attach_log(&mut self, log: SessionLogWriter) {
        self.log = Some(log);
    }

    pub fn take_log(&mut self) -> Option<SessionLogWriter> {
        self.log.take()
    }

    /// Messages produced since the last call.
    pub fn drain(&mut self) -> Vec<ServerMsg> {
        std::mem::take(&mut self.outbox)
    }

    pub fn handle_command(&mut self, cmd: &Command) -> Result<String, CommandError> {
        if let Some(log) = &mut self.log {
            log.command(self.ticks, cmd);
        }
        let bad = |m: String| CommandError::new(ErrorCode::BadArguments, m);
        match cmd {
            Command::Estop => {
                self.robot.emergency_stop();
                Ok("emergency stop".into())
            }
            Command::ReleaseEstop => {
                self.robot.release_estop();
                Ok("emergency stop released".into())
            }
            Command::InjectGesture { class, confidence } => {
                if !(0.0..=1.0).contains(confidence) {
                    return Err(bad(format!("confidence {confidence} outside [0, 1]")));
                }
                let gesture = parse_class(class)?;
                let dispatch = self.publish_event(gesture, *confidence, EventSource::Injected, None);
                Ok(match dispatch {
                    Some(d) => format!("{}: {}", gesture.map_or(NO_GESTURE, |g| g.name()), describe(&d)),
                    None => NO_GESTURE.to_string(),
                })
            }
            Command::PlayGesture { class } => {
                let Some(gesture) = parse_class(class)? else {
                    return Err(bad("cannot play no_gesture".into()));
                };
                if self.classifier.is_none() {
                    return Err(CommandError::rejected("no classifier loaded; use inject_gesture"));
                }
                match &mut self.source {
                    FrameSource::Live(scene) => {
                        scene.play(gesture);
                        Ok(format!("queued {gesture}"))
                    }
                    FrameSource::File(_) => Err(CommandError::rejected("source is a file replay")),
                }
            }
            Command::SetProximity { distance } => {
                if let Some(d) = distance {
                    if !(d.is_finite() && *d >= 0.0) {
                        return Err(bad(format!("distance {d}")));
                    }
                }
                self.robot.set_human_distance(*distance);
                Ok(match distance {
                    Some(d) => format!("proximity {d} m"),
                    None => "proximity cleared".into(),
                })
            }
            Command::SetSpeedOverride { fraction } => {
                self.robot.set_speed_override(*fraction).map_err(|e| bad(e.to_string()))?;
                Ok(format!("speed override {fraction}"))
            }
            Command::LoadPreset { id } => {
                if let Some((tree, _, _)) = self.engine.status() {
                    return Err(CommandError::rejected(format!("tree {tree} is running")));
                }
                let text = bt::preset(id).map_err(|e| bad(e.to_string()))?;
                let table =
                    bt::load_bindings(text, &self.robot.config().catalog()).map_err(|e| bad(e.to_string()))?;
                let name = table.name.clone();
                self.engine = Engine::new(table);
                self.preset_id = id.clone();
                Ok(format!("loaded {name}"))
            }
        }
    }

    /// Runs ticks covering `seconds` of simulation time.
    pub fn run_for(&mut self, seconds: f64) -> Result<(), GatewayError> {
        let n = (seconds / self.dt).round() as u64;
        for _ in 0..n {
            self.tick()?;
        }
        Ok(())
    }

    pub fn tick(&mut self) -> Result<(), GatewayError> {
        if self.ticks.is_multiple_of(self.frame_every) {
            self.process_frame()?;
        }
        let bt_tick = self.ticks.is_multiple_of(self.bt_every);
        let mut finished = None;
        if bt_tick {
            finished = self.engine.tick(&mut self.robot);
        }
        self.robot.step(self.dt);
        self.ticks += 1;
        if bt_tick {
            let now = self.robot.state().sim_time;
            let (tree, node_path, status) = match self.engine.status() {
                Some((t, p, s)) => (Some(t.to_string()), Some(p), Some(s)),
                None => (None, None, None),
            };
            self.emit(ServerMsg::Telemetry(TelemetryMsg::BtStatus { timestamp: now, tree, node_path, status, finished }));
            self.emit(ServerMsg::Telemetry(TelemetryMsg::RobotState {
                timestamp: now,
                state: self.robot.state().clone(),
                end_effector: self.robot.end_effector(),
                frames: self.robot.frame_origins(),
            }));
        }
        let metrics_every = (METRICS_EVERY_S * self.config.loop_hz).round() as u64;
        if self.ticks.is_multiple_of(metrics_every) {
            self.emit_metrics();
        }
        Ok(())
    }

    fn process_frame(&mut self) -> Result<(), GatewayError> {
        let timestamp = self.time();
        let index = self.frame_index;
        self.frame_index += 1;
        let ingest = Instant::now();
        let frame = match self.source.next_frame()? {
            Some(cube) => extract_frame(&cube, &self.config.dsp, index)?,
            None => FrameDetections::empty(index),
        };
        self.metrics_frames += 1;
        self.emit(ServerMsg::Telemetry(TelemetryMsg::PointCloud { timestamp, frame: frame.clone() }));
        let Some(segment) = self.segmenter.push_frame(frame) else {
            return Ok(());
        };
        let Some(ckpt) = &self.classifier else {
            return Ok(());
        };
        let prediction = ckpt.network.predict(segment.features.values(), self.engine.threshold())?;
        let (gesture, confidence) = match prediction {
            Prediction::Gesture { class, confidence } => (Some(class), confidence),
            Prediction::NoGesture { confidence } => (None, confidence),
        };
        self.publish_event(gesture, confidence, EventSource::Radar, Some([segment.first_frame, segment.last_frame]));
        let ms = ingest.elapsed().as_secs_f64() * 1e3;
        self.latency.last = Some(ms);
        self.latency.sum += ms;
        self.latency.count += 1;
        self.latency.max = self.latency.max.max(ms);
        Ok(())
    }

    fn publish_event(
        &mut self,
        gesture: Option<GestureClass>,
        confidence: f64,
        source: EventSource,
        frames: Option<[u64; 2]>,
    ) -> Option<Dispatch> {
        let dispatch = gesture.map(|g| self.engine.on_gesture(g, confidence, &mut self.robot));
        let event = GestureEventMsg {
            channel: GESTURE_CHANNEL.to_string(),
            seq: self.seq,
            class: gesture.map_or(NO_GESTURE, |g| g.name()).to_string(),
            confidence,
            timestamp: self.time(),
            source,
            frames,
            dispatch: dispatch.clone(),
        };
        self.seq += 1;
        self.events.push(event.clone());
        self.emit(ServerMsg::Gesture(event));
        dispatch
    }

    fn emit_metrics(&mut self) {
        let wall = self.metrics_clock.elapsed().as_secs_f64();
        let l = &self.latency;
        let msg = TelemetryMsg::Metrics {
            timestamp: self.time(),
            latency_ms: l.last,
            mean_latency_ms: (l.count > 0).then(|| l.sum / l.count as f64),
            max_latency_ms: (l.count > 0).then_some(l.max),
            frames_per_s: if wall > 0.0 { self.metrics_frames as f64 / wall } else { 0.0 },
            frames_dropped: self.segmenter.dropped(),
            telemetry_dropped: 0,
        };
        self.metrics_frames = 0;
        self.metrics_clock = Instant::now();
        self.emit(ServerMsg::Telemetry(msg));
    }

    fn emit(&mut self, msg: ServerMsg) {
        if let Some(log) = &mut self.log {
            log.message(self.ticks, &msg);
        }
        self.outbox.push(msg);
    }

    /// Writes the closing record, if a log is attached, and returns it.
    pub fn finish_log(&mut self) -> Option<Result<(), GatewayError>> {
        let mut log = self.log.take()?;
        Some(log.finish(self.ticks, self.robot.state()))
    }
}

fn parse_class(name: &str) -> Result<Option<GestureClass>, CommandError> {
    if name == NO_GESTURE {
        return Ok(None);
    }
    name.parse::<GestureClass>()
        .map(Some)
        .map_err(|_| CommandError::new(ErrorCode::BadArguments, format!("unknown gesture {name:?}")))
}

fn describe(d: &Dispatch) -> String {
    match d {
        Dispatch::BelowThreshold => "below confidence threshold".into(),
        Dispatch::Unbound => "no tree bound".into(),
        Dispatch::Rejected { running } => format!("rejected, {running} is running"),
        Dispatch::Launched { tree } => format!("launched {tree}"),
        Dispatch::EmergencyStop { tree, aborted: Some(a) } => format!("{tree} aborted {a}"),
        Dispatch::EmergencyStop { tree, aborted: None } => format!("launched {tree}"),
    }
}
