//! Line-delimited JSON session logs.
//!
//! ```text
//! {"record":"header","format":"gesture-cell-session","version":1,"config":{...}}
//! {"record":"command","tick":120,"command":{"cmd":"play_gesture","class":"up"}}
//! {"record":"message","tick":120,"message":{"kind":"telemetry","data":{...}}}
//! ...
//! {"record":"end","tick":6000,"robot":{...}}
//! ```
//!
//! `tick` counts loop ticks since the session started; a command with tick
//! `k` was applied after `k` ticks had run. Replaying the commands at the
//! same ticks with the same config and checkpoint reproduces the run.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use gesture_cell::net::Checkpoint;
use gesture_cell::robot::RobotState;
use serde::{Deserialize, Serialize};

use crate::messages::{Command, GestureEventMsg, ServerMsg};
use crate::session::{PipelineConfig, Session};
use crate::GatewayError;

pub const LOG_FORMAT: &str = "gesture-cell-session";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LogRecord {
    Header { format: String, version: u32, config: PipelineConfig },
    Command { tick: u64, command: Command },
    Message { tick: u64, message: ServerMsg },
    End { tick: u64, robot: RobotState },
}

pub struct SessionLogWriter {
    out: Box<dyn Write + Send>,
    records: usize,
    error: Option<io::Error>,
}

impl SessionLogWriter {
    pub fn create(path: &Path, config: &PipelineConfig) -> Result<Self, GatewayError> {
        let file = File::create(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Self::new(Box::new(BufWriter::new(file)), config)
    }

    pub fn new(out: Box<dyn Write + Send>, config: &PipelineConfig) -> Result<Self, GatewayError> {
        let mut w = Self { out, records: 0, error: None };
        w.write(&LogRecord::Header { format: LOG_FORMAT.into(), version: LOG_VERSION, config: config.clone() });
        match w.error.take() {
            Some(e) => Err(GatewayError::Io(e.to_string())),
            None => Ok(w),
        }
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn command(&mut self, tick: u64, command: &Command) {
        self.write(&LogRecord::Command { tick, command: command.clone() });
    }

    pub fn message(&mut self, tick: u64, message: &ServerMsg) {
        self.write(&LogRecord::Message { tick, message: message.clone() });
    }

    /// Writes the end record and flushes. Reports the first write error of
    /// the whole log.
    pub fn finish(&mut self, tick: u64, robot: &RobotState) -> Result<(), GatewayError> {
        self.write(&LogRecord::End { tick, robot: robot.clone() });
        if self.error.is_none() {
            if let Err(e) = self.out.flush() {
                self.error = Some(e);
            }
        }
        match self.error.take() {
            Some(e) => Err(GatewayError::Io(e.to_string())),
            None => Ok(()),
        }
    }

    fn write(&mut self, record: &LogRecord) {
        if self.error.is_some() {
            return;
        }
        let mut line = serde_json::to_vec(record).expect("log records serialise");
        line.push(b'\n');
        match self.out.write_all(&line) {
            Ok(()) => self.records += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLog {
    /// `None` for an empty log.
    pub config: Option<PipelineConfig>,
    /// Complete records after the header.
    pub records: Vec<LogRecord>,
    /// The last line was cut off and ignored.
    pub truncated: bool,
}

impl LoadedLog {
    pub fn events(&self) -> Vec<&GestureEventMsg> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Message { message: ServerMsg::Gesture(e), .. } => Some(e),
                _ => None,
            })
            .collect()
    }

    pub fn end(&self) -> Option<(u64, &RobotState)> {
        self.records.iter().rev().find_map(|r| match r {
            LogRecord::End { tick, robot } => Some((*tick, robot)),
            _ => None,
        })
    }
}

pub fn read_log(path: &Path) -> Result<LoadedLog, GatewayError> {
    let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
    parse_log(&text)
}

pub fn parse_log(text: &str) -> Result<LoadedLog, GatewayError> {
    let mut out = LoadedLog { config: None, records: Vec::new(), truncated: false };
    if text.trim().is_empty() {
        return Ok(out);
    }
    let ends_clean = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let last = i + 1 == lines.len();
        if i == 0 {
            match header(line) {
                Ok(config) => out.config = Some(config),
                Err(HeaderError::Fatal(e)) => return Err(e),
                Err(HeaderError::Cut) if last && !ends_clean => {
                    out.truncated = true;
                    return Ok(out);
                }
                Err(HeaderError::Cut) => return Err(GatewayError::Log("line 1: malformed header".into())),
            }
            continue;
        }
        match serde_json::from_str::<LogRecord>(line) {
            Ok(LogRecord::Header { .. }) => return Err(GatewayError::Log(format!("line {}: second header", i + 1))),
            Ok(r) => out.records.push(r),
            Err(_) if last && !ends_clean => out.truncated = true,
            Err(e) => return Err(GatewayError::Log(format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

enum HeaderError {
    Fatal(GatewayError),
    Cut,
}

fn header(line: &str) -> Result<PipelineConfig, HeaderError> {
    let v: serde_json::Value = serde_json::from_str(line).map_err(|_| HeaderError::Cut)?;
    if v["record"] != "header" || v["format"] != LOG_FORMAT {
        return Err(HeaderError::Fatal(GatewayError::Log("not a session log".into())));
    }
    match v["version"].as_u64() {
        Some(n) if n == LOG_VERSION as u64 => {}
        other => {
            return Err(HeaderError::Fatal(GatewayError::LogVersion {
                found: other.map_or_else(|| "none".to_string(), |n| n.to_string()),
                expected: LOG_VERSION,
            }))
        }
    }
    serde_json::from_value(v["config"].clone())
        .map_err(|e| HeaderError::Fatal(GatewayError::Log(format!("header config: {e}"))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    /// Complete records read, header excluded.
    pub records: usize,
    pub truncated: bool,
    pub ticks: u64,
    pub recorded_events: usize,
    pub replayed_events: usize,
    /// Serialised events agree; for a truncated log the recorded events
    /// only need to be a prefix of the replayed ones.
    pub events_match: bool,
    pub first_mismatch: Option<usize>,
    /// `None` when the log has no end record.
    pub final_state_match: Option<bool>,
}

impl ReplayReport {
    pub fn is_faithful(&self) -> bool {
        self.events_match && self.final_state_match != Some(false)
    }
}

/// Re-runs a logged session. `checkpoint` overrides the path in the
/// header.
pub fn replay(log: &LoadedLog, checkpoint: Option<Checkpoint>) -> Result<ReplayReport, GatewayError> {
    let Some(config) = &log.config else {
        return Ok(ReplayReport {
            records: 0,
            truncated: log.truncated,
            ticks: 0,
            recorded_events: 0,
            replayed_events: 0,
            events_match: true,
            first_mismatch: None,
            final_state_match: None,
        });
    };
    let mut session = match checkpoint {
        Some(c) => Session::with_classifier(config.clone(), Some(c))?,
        None => Session::new(config.clone())?,
    };
    let end_tick = match log.end() {
        Some((tick, _)) => tick,
        None => log
            .records
            .iter()
            .map(|r| match r {
                LogRecord::Command { tick, .. } | LogRecord::Message { tick, .. } => *tick + 1,
                _ => 0,
            })
            .max()
            .unwrap_or(0),
    };
    for r in &log.records {
        if let LogRecord::Command { tick, command } = r {
            while session.ticks() < *tick {
                session.tick()?;
            }
            let _ = session.handle_command(command);
        }
    }
    while session.ticks() < end_tick {
        session.tick()?;
    }

    let recorded: Vec<String> = log.events().iter().map(to_json).collect();
    let replayed: Vec<String> = session.events().iter().map(to_json).collect();
    let first_mismatch = recorded.iter().zip(&replayed).position(|(a, b)| a != b).or_else(|| {
        let short = recorded.len().min(replayed.len());
        let extra = if log.truncated { recorded.len() > replayed.len() } else { recorded.len() != replayed.len() };
        extra.then_some(short)
    });
    let final_state_match = log.end().map(|(_, robot)| to_json(robot) == to_json(session.robot().state()));
    Ok(ReplayReport {
        records: log.records.len(),
        truncated: log.truncated,
        ticks: session.ticks(),
        recorded_events: recorded.len(),
        replayed_events: replayed.len(),
        events_match: first_mismatch.is_none(),
        first_mismatch,
        final_state_match,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serialisable")
}
