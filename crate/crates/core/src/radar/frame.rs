use serde::{Deserialize, Serialize};

use super::{cfar_2d, estimate_angle, mti_filter, range_doppler, CfarParams, RadarCube, RadarError, Window};

/// One CFAR hit in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Linear power of the cell.
    pub peak: f64,
    /// Metres.
    pub range: f64,
    /// Radial velocity in m/s, approaching positive.
    pub doppler: f64,
    pub x: f64,
    pub y: f64,
}

impl Detection {
    pub const FEATURES: usize = 5;

    pub fn features(&self) -> [f64; 5] {
        [self.peak, self.range, self.doppler, self.x, self.y]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: u64,
    /// Sorted by peak, strongest first.
    pub detections: Vec<Detection>,
}

impl FrameDetections {
    pub fn empty(frame_index: u64) -> Self {
        Self { frame_index, detections: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Everything the per-frame chain needs besides the cube itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DspParams {
    pub window: Window,
    /// Doppler columns cleared on each side of zero.
    pub notch_halfwidth: usize,
    pub cfar: CfarParams,
    pub angle_fft_size: usize,
}

impl Default for DspParams {
    fn default() -> Self {
        Self { window: Window::Hann, notch_halfwidth: 1, cfar: CfarParams::default(), angle_fft_size: 64 }
    }
}

/// Range-Doppler → MTI notch → CA-CFAR → per-cell azimuth → physical units.
pub fn extract_frame(cube: &RadarCube, params: &DspParams, frame_index: u64) -> Result<FrameDetections, RadarError> {
    let rdm = range_doppler(cube, params.window)?;
    let rdm = mti_filter(&rdm, params.notch_halfwidth)?;
    let cells = cfar_2d(&rdm, &params.cfar)?;

    let cfg = cube.config();
    let range_res = cfg.range_resolution();
    let doppler_res = cfg.doppler_resolution();
    let centre = rdm.zero_doppler_column() as f64;

    let mut detections = Vec::with_capacity(cells.len());
    for (r, d) in cells {
        let angle = estimate_angle(&rdm, (r, d), params.angle_fft_size)?;
        let range = r as f64 * range_res;
        detections.push(Detection {
            peak: rdm.power_at(r, d),
            range,
            doppler: (d as f64 - centre) * doppler_res,
            x: range * angle.azimuth.sin(),
            y: range * angle.azimuth.cos(),
        });
    }
    Ok(FrameDetections { frame_index, detections })
}
