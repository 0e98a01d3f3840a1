use num_complex::Complex64;

use super::{spectrum::fft_in_place, RadarError, RangeDopplerMap};

/// Azimuth estimate for one range-Doppler cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    /// Radians, positive towards +x.
    pub azimuth: f64,
    /// Spatial frequency of the angle-spectrum peak, cycles per element in
    /// [-0.5, 0.5).
    pub spatial_freq: f64,
    /// The peak spatial frequency exceeded the element spacing and the
    /// azimuth was clamped to ±π/2.
    pub saturated: bool,
}

/// Zero-padded FFT across the channel axis of one cell; the peak bin's
/// spatial frequency `f` maps to `asin(f / spacing)`.
pub fn estimate_angle(
    rdm: &RangeDopplerMap,
    cell: (usize, usize),
    fft_size: usize,
) -> Result<AngleEstimate, RadarError> {
    let (range, doppler) = cell;
    if range >= rdm.range_bins() || doppler >= rdm.doppler_bins() {
        return Err(RadarError::InvalidConfig(format!(
            "cell ({range}, {doppler}) outside {}x{} map",
            rdm.range_bins(),
            rdm.doppler_bins()
        )));
    }
    if !fft_size.is_power_of_two() || fft_size < rdm.channels() {
        return Err(RadarError::InvalidConfig(format!(
            "angle FFT size {fft_size} must be a power of two >= {} channels",
            rdm.channels()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    buf[..rdm.channels()].copy_from_slice(rdm.cell_spectrum(range, doppler));
    fft_in_place(&mut buf);

    let mut best = 0;
    let mut best_mag = buf[0].norm_sqr();
    for (i, z) in buf.iter().enumerate().skip(1) {
        let m = z.norm_sqr();
        if m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    let signed = if best >= fft_size / 2 { best as isize - fft_size as isize } else { best as isize };
    let spatial_freq = signed as f64 / fft_size as f64;
    Ok(spatial_freq_to_azimuth(spatial_freq, rdm.config().antenna_spacing))
}

pub fn spatial_freq_to_azimuth(spatial_freq: f64, spacing: f64) -> AngleEstimate {
    let ratio = spatial_freq / spacing;
    if ratio.abs() > 1.0 {
        AngleEstimate {
            azimuth: ratio.signum() * std::f64::consts::FRAC_PI_2,
            spatial_freq,
            saturated: true,
        }
    } else {
        AngleEstimate { azimuth: ratio.asin(), spatial_freq, saturated: false }
    }
}

/// Width in radians of one angle-FFT bin at the given azimuth.
pub fn angle_bin_width(azimuth: f64, spacing: f64, fft_size: usize) -> f64 {
    let s = azimuth.sin();
    let step = 1.0 / (spacing * fft_size as f64);
    let lo = (s - step).clamp(-1.0, 1.0).asin();
    let hi = (s + step).clamp(-1.0, 1.0).asin();
    (hi - lo) / 2.0
}
