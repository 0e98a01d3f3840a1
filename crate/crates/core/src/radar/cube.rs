use num_complex::Complex64;

use super::{RadarConfig, RadarError};

/// Complex baseband samples for one frame, stored `[sample][chirp][channel]`
/// with the channel index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    config: RadarConfig,
    data: Vec<Complex64>,
}

impl RadarCube {
    pub fn zeros(config: RadarConfig) -> Result<Self, RadarError> {
        config.validate()?;
        Ok(Self { config, data: vec![Complex64::new(0.0, 0.0); config.cube_len()] })
    }

    pub fn from_vec(config: RadarConfig, data: Vec<Complex64>) -> Result<Self, RadarError> {
        config.validate()?;
        if data.len() != config.cube_len() {
            return Err(RadarError::DimensionMismatch {
                expected: config.cube_len(),
                actual: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(RadarError::NonFinite);
        }
        Ok(Self { config, data })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, sample: usize, chirp: usize, channel: usize) -> usize {
        (sample * self.config.n_chirps + chirp) * self.config.n_channels + channel
    }

    #[inline]
    pub fn get(&self, sample: usize, chirp: usize, channel: usize) -> Complex64 {
        self.data[self.index(sample, chirp, channel)]
    }

    #[inline]
    pub fn set(&mut self, sample: usize, chirp: usize, channel: usize, value: Complex64) {
        let i = self.index(sample, chirp, channel);
        self.data[i] = value;
    }

    /// Re-checks the shape/finiteness invariants (the data is publicly
    /// mutable through [`data_mut`](Self::data_mut)).
    pub fn check(&self) -> Result<(), RadarError> {
        self.config.validate()?;
        if self.data.len() != self.config.cube_len() {
            return Err(RadarError::DimensionMismatch {
                expected: self.config.cube_len(),
                actual: self.data.len(),
            });
        }
        if self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(RadarError::NonFinite);
        }
        Ok(())
    }
}
