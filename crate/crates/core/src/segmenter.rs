//! Cuts a live stream of point clouds into gesture windows.
//!
//! A frame is active when it has at least `activity_min_detections`
//! detections. `start_frames` consecutive active frames open a window (and
//! are its first frames); the window closes after `end_frames` consecutive
//! inactive frames or when it holds `max_frames`. Inactive frames seen
//! while the window is open stay in it. After each emission the next
//! `refractory_frames` frames are ignored.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::net::{featurize, FeatureMatrix, Normalization, MAX_FRAMES};
use crate::radar::FrameDetections;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub activity_min_detections: usize,
    pub start_frames: usize,
    pub end_frames: usize,
    pub max_frames: usize,
    pub refractory_frames: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self { activity_min_detections: 2, start_frames: 3, end_frames: 5, max_frames: MAX_FRAMES, refractory_frames: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid segmenter config: {0}")]
pub struct SegmenterConfigError(String);

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmenterConfigError> {
        if self.start_frames < 1 || self.end_frames < 1 {
            return Err(SegmenterConfigError("start_frames and end_frames must be >= 1".into()));
        }
        if self.max_frames != MAX_FRAMES {
            return Err(SegmenterConfigError(format!("max_frames must be {MAX_FRAMES}")));
        }
        if self.start_frames > self.max_frames {
            return Err(SegmenterConfigError("start_frames exceeds max_frames".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Active,
    Refractory,
}

/// One emitted gesture window.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub features: FeatureMatrix,
    pub frames: usize,
    pub first_frame: u64,
    pub last_frame: u64,
}

#[derive(Debug, Clone)]
pub struct Segmenter {
    config: SegmenterConfig,
    norm: Normalization,
    mode: Mode,
    /// Candidate opening frames while idle.
    pending: VecDeque<FrameDetections>,
    buffer: Vec<FrameDetections>,
    inactive_run: usize,
    refractory_left: usize,
    last_index: Option<u64>,
    dropped: u64,
}

impl Segmenter {
    pub fn new(config: SegmenterConfig, norm: Normalization) -> Result<Self, SegmenterConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            norm,
            mode: Mode::Idle,
            pending: VecDeque::with_capacity(config.start_frames),
            buffer: Vec::with_capacity(config.max_frames),
            inactive_run: 0,
            refractory_left: 0,
            last_index: None,
            dropped: 0,
        })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Frames refused for arriving out of order.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Back to idle with nothing buffered. The out-of-order guard is kept.
    pub fn reset(&mut self) {
        self.mode = Mode::Idle;
        self.pending.clear();
        self.buffer.clear();
        self.inactive_run = 0;
        self.refractory_left = 0;
    }

    pub fn push_frame(&mut self, frame: FrameDetections) -> Option<Segment> {
        if self.last_index.is_some_and(|last| frame.frame_index <= last) {
            self.dropped += 1;
            return None;
        }
        self.last_index = Some(frame.frame_index);
        let active = frame.len() >= self.config.activity_min_detections;

        match self.mode {
            Mode::Refractory => {
                self.refractory_left -= 1;
                if self.refractory_left == 0 {
                    self.mode = Mode::Idle;
                }
                None
            }
            Mode::Idle => {
                if !active {
                    self.pending.clear();
                    return None;
                }
                self.pending.push_back(frame);
                if self.pending.len() < self.config.start_frames {
                    return None;
                }
                self.mode = Mode::Active;
                self.inactive_run = 0;
                self.buffer.extend(self.pending.drain(..));
                self.maybe_emit()
            }
            Mode::Active => {
                self.inactive_run = if active { 0 } else { self.inactive_run + 1 };
                self.buffer.push(frame);
                self.maybe_emit()
            }
        }
    }

    fn maybe_emit(&mut self) -> Option<Segment> {
        if self.inactive_run < self.config.end_frames && self.buffer.len() < self.config.max_frames {
            return None;
        }
        let segment = Segment {
            features: featurize(&self.buffer, &self.norm),
            frames: self.buffer.len(),
            first_frame: self.buffer[0].frame_index,
            last_frame: self.buffer[self.buffer.len() - 1].frame_index,
        };
        self.buffer.clear();
        self.inactive_run = 0;
        self.refractory_left = self.config.refractory_frames;
        self.mode = if self.refractory_left > 0 { Mode::Refractory } else { Mode::Idle };
        Some(segment)
    }
}
