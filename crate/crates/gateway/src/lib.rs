//! Composition root of the gesture cell: the real-time pipeline, its
//! operator protocol, session logs and the scripted demos.

pub mod demo;
pub mod log;
pub mod messages;
pub mod server;
pub mod session;
pub mod source;
pub mod training;
pub mod wire;

use std::path::PathBuf;

pub use session::{PipelineConfig, Session};

/// Root for datasets and checkpoints when no path is given.
pub const HOME_ENV: &str = "GESTURE_CELL_HOME";

pub fn home_dir() -> PathBuf {
    std::env::var_os(HOME_ENV).map_or_else(|| PathBuf::from("gesture-cell-data"), PathBuf::from)
}

pub fn default_dataset_dir() -> PathBuf {
    home_dir().join("dataset")
}

pub fn default_checkpoint() -> PathBuf {
    home_dir().join("model.gnet")
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("session log: {0}")]
    Log(String),
    #[error("session log version {found}, this build reads version {expected}")]
    LogVersion { found: String, expected: u32 },
    #[error("timed out: {0}")]
    Timeout(String),
    #[error(transparent)]
    Synth(#[from] gesture_cell::synth::SynthError),
    #[error(transparent)]
    Radar(#[from] gesture_cell::radar::RadarError),
    #[error(transparent)]
    Net(#[from] gesture_cell::net::NetError),
    #[error(transparent)]
    Robot(#[from] gesture_cell::robot::RobotError),
    #[error(transparent)]
    Bt(#[from] gesture_cell::bt::BtError),
}
