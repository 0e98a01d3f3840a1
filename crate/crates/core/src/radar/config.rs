use serde::{Deserialize, Serialize};

use super::{RadarError, SPEED_OF_LIGHT};

/// Physical parameters of one FMCW frame.
///
/// The cube axes are fast-time samples × chirps × virtual channels. The
/// defaults model a 2 TX × 4 RX array at 77 GHz looking at a hand 0.2 m to
/// 0.6 m away: 3.75 cm range bins out to 1.2 m and 6.1 cm/s Doppler bins
/// with ±0.97 m/s unambiguous velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Fast-time ADC samples per chirp.
    pub n_samples: usize,
    /// Chirps per frame (slow time).
    pub n_chirps: usize,
    /// Virtual antenna channels.
    pub n_channels: usize,
    /// ADC sample rate, Hz.
    pub sample_rate: f64,
    /// Chirp frequency slope, Hz/s.
    pub chirp_slope: f64,
    /// Chirp repetition period, s.
    pub chirp_period: f64,
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Virtual element spacing in wavelengths.
    pub antenna_spacing: f64,
    /// Time between frames, s.
    pub frame_period: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            n_samples: 64,
            n_chirps: 32,
            n_channels: 8,
            sample_rate: 2.0e6,
            chirp_slope: 1.25e14,
            chirp_period: 1.0e-3,
            carrier_freq: 77.0e9,
            antenna_spacing: 0.5,
            frame_period: 0.04,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<(), RadarError> {
        let bad = |msg: String| Err(RadarError::InvalidConfig(msg));
        if self.n_samples < 2 || self.n_chirps < 2 || self.n_channels < 2 {
            return bad(format!(
                "all cube dimensions must be >= 2, got {}x{}x{}",
                self.n_samples, self.n_chirps, self.n_channels
            ));
        }
        if !self.n_samples.is_power_of_two() || !self.n_chirps.is_power_of_two() {
            return bad(format!(
                "n_samples ({}) and n_chirps ({}) must be powers of two",
                self.n_samples, self.n_chirps
            ));
        }
        if !(self.antenna_spacing > 0.0 && self.antenna_spacing <= 1.0) {
            return bad(format!("antenna_spacing {} outside (0, 1]", self.antenna_spacing));
        }
        for (name, v) in [
            ("sample_rate", self.sample_rate),
            ("chirp_slope", self.chirp_slope),
            ("chirp_period", self.chirp_period),
            ("carrier_freq", self.carrier_freq),
            ("frame_period", self.frame_period),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Bandwidth swept while the ADC is sampling.
    pub fn effective_bandwidth(&self) -> f64 {
        self.chirp_slope * self.n_samples as f64 / self.sample_rate
    }

    /// Metres per range bin.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.effective_bandwidth())
    }

    /// Metres per second per Doppler bin.
    pub fn doppler_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.n_chirps as f64 * self.chirp_period)
    }

    pub fn range_bins(&self) -> usize {
        self.n_samples / 2
    }

    pub fn max_range(&self) -> f64 {
        self.range_bins() as f64 * self.range_resolution()
    }

    /// Largest |radial velocity| before Doppler wraps.
    pub fn max_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_period)
    }

    /// Fractional range bin of a target at `range` metres.
    pub fn range_to_bin(&self, range: f64) -> f64 {
        range / self.range_resolution()
    }

    /// Fractional Doppler column (zero Doppler at `n_chirps / 2`) for a
    /// radial velocity, approaching positive.
    pub fn velocity_to_column(&self, velocity: f64) -> f64 {
        velocity / self.doppler_resolution() + (self.n_chirps / 2) as f64
    }

    pub fn cube_len(&self) -> usize {
        self.n_samples * self.n_chirps * self.n_channels
    }
}

/// Taper applied along fast time and slow time before the 2D FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann. A static target lands exactly in Doppler columns
    /// `centre ± 1` and nowhere else.
    #[default]
    Hann,
    None,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}
