//! FMCW radar cube → per-frame point cloud.
//!
//! ```text
//! cube ─► 2D FFT per channel ─► Σ|X|² (RDM) ─► zero-Doppler notch ─► CA-CFAR
//!                                     └── channel spectra ─► angle FFT ─► (x, y)
//! ```

mod angle;
mod cfar;
mod config;
mod cube;
mod frame;
pub mod io;
mod spectrum;

pub use angle::{angle_bin_width, estimate_angle, spatial_freq_to_azimuth, AngleEstimate};
pub use cfar::{cfar_2d, CfarParams};
pub use config::{RadarConfig, Window};
pub use cube::RadarCube;
pub use frame::{extract_frame, Detection, DspParams, FrameDetections};
pub use spectrum::{channel_spectrum_2d, fft_in_place, mti_filter, range_doppler, RangeDopplerMap};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, thiserror::Error)]
pub enum RadarError {
    #[error("invalid radar configuration: {0}")]
    InvalidConfig(String),
    #[error("cube has {actual} samples, configuration expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cube contains non-finite samples")]
    NonFinite,
    #[error("malformed cube file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
