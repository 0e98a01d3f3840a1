//! Simulated mm-wave gesture-controlled robot cell.
//!
//! Synthetic FMCW radar frames are turned into point clouds, segmented into
//! gesture windows, classified by a 1D CNN and dispatched to behavior trees
//! that drive a kinematic 6-DoF arm on a linear guide.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bt;
pub mod net;
pub mod radar;
pub mod robot;
pub mod segmenter;
pub mod synth;
