use serde::{Deserialize, Serialize};

use super::{FRAME_FEATURES, MAX_FRAMES, MAX_OBJECTS};
use crate::radar::{Detection, FrameDetections};

/// Per-feature affine normalisation of (ln peak, range, doppler, x, y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 5],
    pub std: [f64; 5],
}

impl Default for Normalization {
    fn default() -> Self {
        Self::identity()
    }
}

impl Normalization {
    /// ln peak, everything else passed through.
    pub fn identity() -> Self {
        Self { mean: [0.0; 5], std: [1.0; 5] }
    }

    /// Statistics over every detection of the given samples. A feature with
    /// zero spread keeps std 1.
    pub fn fit<'a, I>(samples: I) -> Self
    where
        I: IntoIterator<Item = &'a [FrameDetections]>,
    {
        let mut n = 0usize;
        let mut sum = [0.0; 5];
        let mut sq = [0.0; 5];
        for frames in samples {
            for d in frames.iter().flat_map(|f| &f.detections) {
                let v = raw(d);
                for i in 0..5 {
                    sum[i] += v[i];
                    sq[i] += v[i] * v[i];
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity();
        }
        let mut out = Self::identity();
        for i in 0..5 {
            let mean = sum[i] / n as f64;
            let var = (sq[i] / n as f64 - mean * mean).max(0.0);
            out.mean[i] = mean;
            out.std[i] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        out
    }

    pub fn apply(&self, d: &Detection) -> [f64; 5] {
        let v = raw(d);
        std::array::from_fn(|i| (v[i] - self.mean[i]) / self.std[i])
    }
}

fn raw(d: &Detection) -> [f64; 5] {
    let f = d.features();
    [f[0].max(f64::MIN_POSITIVE).ln(), f[1], f[2], f[3], f[4]]
}

/// Network input: `MAX_FRAMES` rows of `MAX_OBJECTS` five-feature slots.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f32>,
    /// Rows holding frames; the rest are zero.
    pub frames: usize,
    /// More than `MAX_FRAMES` frames were given and the oldest dropped.
    pub truncated: bool,
}

impl FeatureMatrix {
    pub const ROWS: usize = MAX_FRAMES;
    pub const COLS: usize = FRAME_FEATURES;

    pub fn zeros() -> Self {
        Self { values: vec![0.0; Self::ROWS * Self::COLS], frames: 0, truncated: false }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * Self::COLS..(i + 1) * Self::COLS]
    }
}

/// Lays out up to the last `MAX_FRAMES` frames, detections in stored order,
/// at most `MAX_OBJECTS` per frame; empty slots stay zero.
pub fn featurize(frames: &[FrameDetections], norm: &Normalization) -> FeatureMatrix {
    let mut m = FeatureMatrix::zeros();
    let skip = frames.len().saturating_sub(MAX_FRAMES);
    m.truncated = skip > 0;
    m.frames = frames.len() - skip;
    for (row, frame) in frames[skip..].iter().enumerate() {
        let base = row * FeatureMatrix::COLS;
        for (slot, d) in frame.detections.iter().take(MAX_OBJECTS).enumerate() {
            let v = norm.apply(d);
            for (k, x) in v.iter().enumerate() {
                m.values[base + slot * Detection::FEATURES + k] = *x as f32;
            }
        }
    }
    m
}
