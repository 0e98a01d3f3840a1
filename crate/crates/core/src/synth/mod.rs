//! Synthetic radar scenes for the nine gestures.

mod dataset;
mod gesture;
mod scene;

pub use dataset::*;
pub use gesture::{gesture_trajectory, GestureClass, GestureScript, SpeedProfile};
pub use scene::{
    synth_cube, synth_gesture_sequence, Environment, EnvironmentProfile, Hand, HandModel, Scatterer, SceneSim,
};

use std::path::PathBuf;

use crate::radar::RadarError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("unknown gesture {0:?}")]
    UnknownGesture(String),
    #[error("unknown environment {0:?}")]
    UnknownEnvironment(String),
    #[error("invalid gesture script: {0}")]
    InvalidScript(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid scatterer {0:?}")]
    InvalidScatterer(Scatterer),
    #[error("t = {t} s outside gesture of {duration} s")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("gesture needs {frames} frames, buffer holds {max}")]
    TooManyFrames { frames: usize, max: usize },
    #[error("dataset manifest: {0}")]
    Manifest(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Radar(#[from] RadarError),
}
