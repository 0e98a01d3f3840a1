use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{RadarConfig, RadarCube, RadarError, Window};

/// Positive-range half of the 2D spectrum with the Doppler axis centred
/// (zero Doppler at column `n_chirps / 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    config: RadarConfig,
    range_bins: usize,
    doppler_bins: usize,
    channels: usize,
    /// `[range][doppler]`, channel sum of |X|².
    power: Vec<f64>,
    /// `[range][doppler][channel]`.
    spectra: Vec<Complex64>,
}

impl RangeDopplerMap {
    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn range_bins(&self) -> usize {
        self.range_bins
    }

    pub fn doppler_bins(&self) -> usize {
        self.doppler_bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Column holding zero Doppler.
    pub fn zero_doppler_column(&self) -> usize {
        self.doppler_bins / 2
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    #[inline]
    pub fn power_at(&self, range: usize, doppler: usize) -> f64 {
        self.power[range * self.doppler_bins + doppler]
    }

    /// Channel vector of one cell.
    pub fn cell_spectrum(&self, range: usize, doppler: usize) -> &[Complex64] {
        let start = (range * self.doppler_bins + doppler) * self.channels;
        &self.spectra[start..start + self.channels]
    }

    pub fn cell_spectrum_mut(&mut self, range: usize, doppler: usize) -> &mut [Complex64] {
        let start = (range * self.doppler_bins + doppler) * self.channels;
        &mut self.spectra[start..start + self.channels]
    }

    /// Recomputes the power of one cell from its channel spectra.
    pub fn refresh_power(&mut self, range: usize, doppler: usize) {
        let p = self.cell_spectrum(range, doppler).iter().map(|z| z.norm_sqr()).sum();
        self.power[range * self.doppler_bins + doppler] = p;
    }

    /// Builds a map directly from a power grid, with zero channel spectra.
    /// Used for exercising detectors on synthetic power maps.
    pub fn from_power(
        config: RadarConfig,
        range_bins: usize,
        doppler_bins: usize,
        power: Vec<f64>,
    ) -> Result<Self, RadarError> {
        if power.len() != range_bins * doppler_bins {
            return Err(RadarError::DimensionMismatch {
                expected: range_bins * doppler_bins,
                actual: power.len(),
            });
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(RadarError::NonFinite);
        }
        Ok(Self {
            config,
            range_bins,
            doppler_bins,
            channels: config.n_channels,
            power,
            spectra: vec![Complex64::new(0.0, 0.0); range_bins * doppler_bins * config.n_channels],
        })
    }

    pub fn max_power(&self) -> f64 {
        self.power.iter().copied().fold(0.0, f64::max)
    }

    /// (range, doppler) of the strongest cell; first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = i;
            }
        }
        (best / self.doppler_bins, best % self.doppler_bins)
    }
}

/// Unnormalised forward FFT in place (any length).
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(buf);
}

/// Full (unshifted) 2D spectrum of one channel, `[sample_bin][chirp_bin]`.
///
/// This is the stage before range halving and Doppler centring; with
/// [`Window::None`] it satisfies Parseval exactly.
pub fn channel_spectrum_2d(
    cube: &RadarCube,
    channel: usize,
    window: Window,
) -> Result<Vec<Complex64>, RadarError> {
    cube.check()?;
    let cfg = cube.config();
    if channel >= cfg.n_channels {
        return Err(RadarError::InvalidConfig(format!(
            "channel {channel} out of range 0..{}",
            cfg.n_channels
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    Ok(spectrum_2d(cube, channel, &window.coefficients(cfg.n_samples), &window.coefficients(cfg.n_chirps), &mut planner))
}

fn spectrum_2d(
    cube: &RadarCube,
    channel: usize,
    w_fast: &[f64],
    w_slow: &[f64],
    planner: &mut FftPlanner<f64>,
) -> Vec<Complex64> {
    let cfg = cube.config();
    let (ns, nc) = (cfg.n_samples, cfg.n_chirps);
    let fft_fast = planner.plan_fft_forward(ns);
    let fft_slow = planner.plan_fft_forward(nc);

    let mut out = vec![Complex64::new(0.0, 0.0); ns * nc];
    let mut column = vec![Complex64::new(0.0, 0.0); ns];
    for m in 0..nc {
        for n in 0..ns {
            column[n] = cube.get(n, m, channel) * (w_fast[n] * w_slow[m]);
        }
        fft_fast.process(&mut column);
        for n in 0..ns {
            out[n * nc + m] = column[n];
        }
    }
    for row in out.chunks_exact_mut(nc) {
        fft_slow.process(row);
    }
    out
}

/// Windowed 2D FFT per channel, fast time first then chirps, summed into a
/// range-Doppler power map.
pub fn range_doppler(cube: &RadarCube, window: Window) -> Result<RangeDopplerMap, RadarError> {
    cube.check()?;
    let cfg = *cube.config();
    let (nc, nk) = (cfg.n_chirps, cfg.n_channels);
    let nr = cfg.range_bins();
    let half = nc / 2;

    let w_fast = window.coefficients(cfg.n_samples);
    let w_slow = window.coefficients(nc);
    let mut planner = FftPlanner::<f64>::new();

    let mut spectra = vec![Complex64::new(0.0, 0.0); nr * nc * nk];
    for k in 0..nk {
        let full = spectrum_2d(cube, k, &w_fast, &w_slow, &mut planner);
        for r in 0..nr {
            for d in 0..nc {
                let shifted = (d + half) % nc;
                spectra[(r * nc + shifted) * nk + k] = full[r * nc + d];
            }
        }
    }

    let power = spectra.chunks_exact(nk).map(|cell| cell.iter().map(|z| z.norm_sqr()).sum()).collect();

    Ok(RangeDopplerMap { config: cfg, range_bins: nr, doppler_bins: nc, channels: nk, power, spectra })
}

/// Zero-Doppler notch: clears power and channel spectra in the columns
/// within `notch_halfwidth` of zero Doppler.
pub fn mti_filter(rdm: &RangeDopplerMap, notch_halfwidth: usize) -> Result<RangeDopplerMap, RadarError> {
    if notch_halfwidth >= rdm.doppler_bins / 2 {
        return Err(RadarError::InvalidConfig(format!(
            "notch half-width {} must be < n_chirps/2 = {}",
            notch_halfwidth,
            rdm.doppler_bins / 2
        )));
    }
    let mut out = rdm.clone();
    let centre = rdm.zero_doppler_column();
    for r in 0..out.range_bins {
        for d in centre - notch_halfwidth..=centre + notch_halfwidth {
            out.power[r * out.doppler_bins + d] = 0.0;
            out.cell_spectrum_mut(r, d).fill(Complex64::new(0.0, 0.0));
        }
    }
    Ok(out)
}
