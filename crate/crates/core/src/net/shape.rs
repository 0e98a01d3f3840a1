use serde::{Deserialize, Serialize};

use super::{NetError, FRAME_FEATURES, MAX_FRAMES};

pub const KERNEL: usize = 3;

/// Layer widths of the classifier. The default is the full-size network;
/// smaller instances are used for gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub frames: usize,
    pub features: usize,
    /// Filters of both conv1 layers.
    pub conv1: usize,
    pub conv2: usize,
    pub conv3: usize,
    pub dense: usize,
    pub n_classes: usize,
}

/// (time, channels) after every stage of the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeTrace {
    pub input: (usize, usize),
    pub conv1a: (usize, usize),
    pub conv1b: (usize, usize),
    pub pool1: (usize, usize),
    pub conv2: (usize, usize),
    pub pool2: (usize, usize),
    pub conv3: (usize, usize),
    pub pool3: (usize, usize),
    pub flat: usize,
    pub dense: usize,
    pub logits: usize,
}

impl Architecture {
    pub const DEFAULT: Architecture = Architecture {
        frames: MAX_FRAMES,
        features: FRAME_FEATURES,
        conv1: 128,
        conv2: 256,
        conv3: 512,
        dense: 512,
        n_classes: 9,
    };

    /// Smallest frame count that survives three valid convolution + pool
    /// stages with at least one time step left.
    pub const MIN_FRAMES: usize = 24;

    /// Valid convolutions (kernel 3) and floor-halving max pools.
    pub const fn trace(&self) -> ShapeTrace {
        let t1 = self.frames.saturating_sub(KERNEL - 1);
        let t2 = t1.saturating_sub(KERNEL - 1);
        let p1 = t2 / 2;
        let t3 = p1.saturating_sub(KERNEL - 1);
        let p2 = t3 / 2;
        let t4 = p2.saturating_sub(KERNEL - 1);
        let p3 = t4 / 2;
        ShapeTrace {
            input: (self.frames, self.features),
            conv1a: (t1, self.conv1),
            conv1b: (t2, self.conv1),
            pool1: (p1, self.conv1),
            conv2: (t3, self.conv2),
            pool2: (p2, self.conv2),
            conv3: (t4, self.conv3),
            pool3: (p3, self.conv3),
            flat: p3 * self.conv3,
            dense: self.dense,
            logits: self.n_classes,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.frames < Self::MIN_FRAMES {
            return Err(NetError::Architecture(format!(
                "{} frames leave nothing after three pooling stages (need >= {})",
                self.frames,
                Self::MIN_FRAMES
            )));
        }
        let widths = [self.features, self.conv1, self.conv2, self.conv3, self.dense];
        if widths.contains(&0) || self.n_classes < 2 {
            return Err(NetError::Architecture(format!("zero-width layer or < 2 classes in {self:?}")));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.frames * self.features
    }

    /// Shapes of the parameter tensors in storage order: for each layer the
    /// weight (rows, cols) then the bias (1, cols).
    pub fn tensor_shapes(&self) -> [(usize, usize); 12] {
        let s = self.trace();
        [
            (KERNEL * self.features, self.conv1),
            (1, self.conv1),
            (KERNEL * self.conv1, self.conv1),
            (1, self.conv1),
            (KERNEL * self.conv1, self.conv2),
            (1, self.conv2),
            (KERNEL * self.conv2, self.conv3),
            (1, self.conv3),
            (s.flat, self.dense),
            (1, self.dense),
            (self.dense, self.n_classes),
            (1, self.n_classes),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_shapes().iter().map(|(r, c)| r * c).sum()
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub const DEFAULT_TRACE: ShapeTrace = Architecture::DEFAULT.trace();

const _: () = {
    let s = DEFAULT_TRACE;
    assert!(s.input.0 == 50 && s.input.1 == 325);
    assert!(s.conv1a.0 == 48 && s.conv1a.1 == 128);
    assert!(s.conv1b.0 == 46 && s.conv1b.1 == 128);
    assert!(s.pool1.0 == 23);
    assert!(s.conv2.0 == 21 && s.pool2.0 == 10);
    assert!(s.conv3.0 == 8);
    assert!(s.pool3.0 == 4 && s.pool3.1 == 512);
    assert!(s.flat == 2048);
    assert!(s.dense == 512);
};
