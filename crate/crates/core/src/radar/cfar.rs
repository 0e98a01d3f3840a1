use serde::{Deserialize, Serialize};

use super::{RadarError, RangeDopplerMap};

/// Cell-averaging CFAR window. Training and guard widths apply per side on
/// both the range and Doppler axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarParams {
    pub train_cells: usize,
    pub guard_cells: usize,
    /// Threshold multiplier on the training-ring mean.
    pub scale: f64,
    pub max_detections: usize,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self { train_cells: 4, guard_cells: 2, scale: 6.0, max_detections: 65 }
    }
}

impl CfarParams {
    pub fn validate(&self) -> Result<(), RadarError> {
        if self.train_cells < 1 {
            return Err(RadarError::InvalidConfig("CFAR needs at least one training cell".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(RadarError::InvalidConfig(format!("CFAR scale {} must be > 0", self.scale)));
        }
        Ok(())
    }
}

/// Sums over the axis-aligned box of half-width `half` around every cell,
/// clipped to the map. Returns (sums, cell counts).
fn box_sums(power: &[f64], rows: usize, cols: usize, half: usize) -> (Vec<f64>, Vec<usize>) {
    let mut row_sums = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = &power[r * cols..(r + 1) * cols];
        for c in 0..cols {
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(cols - 1);
            row_sums[r * cols + c] = row[lo..=hi].iter().sum();
        }
    }
    let mut sums = vec![0.0; rows * cols];
    let mut counts = vec![0; rows * cols];
    for r in 0..rows {
        let lo = r.saturating_sub(half);
        let hi = (r + half).min(rows - 1);
        for c in 0..cols {
            let mut s = 0.0;
            for rr in lo..=hi {
                s += row_sums[rr * cols + c];
            }
            sums[r * cols + c] = s;
            let width = (c + half).min(cols - 1) - c.saturating_sub(half) + 1;
            counts[r * cols + c] = (hi - lo + 1) * width;
        }
    }
    (sums, counts)
}

/// 2D CA-CFAR. A cell is detected iff its power exceeds `scale` times the
/// mean of its training ring (the part of the ring inside the map). Output
/// is sorted by power descending, ties by (range, doppler) ascending, and
/// truncated to `max_detections`.
pub fn cfar_2d(rdm: &RangeDopplerMap, params: &CfarParams) -> Result<Vec<(usize, usize)>, RadarError> {
    params.validate()?;
    let (rows, cols) = (rdm.range_bins(), rdm.doppler_bins());
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let power = rdm.power();
    let outer = params.guard_cells + params.train_cells;
    let (outer_sum, outer_count) = box_sums(power, rows, cols, outer);
    let (inner_sum, inner_count) = box_sums(power, rows, cols, params.guard_cells);

    let mut hits: Vec<(usize, usize)> = Vec::new();
    for i in 0..rows * cols {
        let count = outer_count[i] - inner_count[i];
        if count == 0 {
            continue;
        }
        let mean = (outer_sum[i] - inner_sum[i]) / count as f64;
        if power[i] > params.scale * mean {
            hits.push((i / cols, i % cols));
        }
    }
    hits.sort_by(|a, b| {
        rdm.power_at(b.0, b.1)
            .total_cmp(&rdm.power_at(a.0, a.1))
            .then_with(|| a.cmp(b))
    });
    hits.truncate(params.max_detections);
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::RadarConfig;

    fn map(rows: usize, cols: usize, power: Vec<f64>) -> RangeDopplerMap {
        RangeDopplerMap::from_power(RadarConfig::default(), rows, cols, power).unwrap()
    }

    #[test]
    fn uniform_map_has_no_detections() {
        for c in [1.0, 0.25, 7.0] {
            for scale in [1.0, 3.0] {
                let rdm = map(16, 16, vec![c; 256]);
                let params = CfarParams { train_cells: 3, guard_cells: 1, scale, max_detections: 65 };
                assert!(cfar_2d(&rdm, &params).unwrap().is_empty(), "c={c} scale={scale}");
            }
        }
    }

    #[test]
    fn single_impulse_is_the_only_detection() {
        let mut p = vec![0.0; 20 * 24];
        p[7 * 24 + 11] = 5.0;
        let hits = cfar_2d(&map(20, 24, p), &CfarParams::default()).unwrap();
        assert_eq!(hits, vec![(7, 11)]);
    }

    #[test]
    fn truncates_and_sorts() {
        let mut p = vec![0.0; 32 * 32];
        // Sparse impulses far enough apart not to shadow each other.
        let mut expected = Vec::new();
        for r in (0..32).step_by(4) {
            for d in (0..32).step_by(4) {
                let v = 1.0 + ((r * 7 + d * 3) % 11) as f64;
                p[r * 32 + d] = v;
                expected.push((v, r, d));
            }
        }
        let params = CfarParams { train_cells: 1, guard_cells: 0, scale: 1.5, max_detections: 10 };
        let hits = cfar_2d(&map(32, 32, p), &params).unwrap();
        assert_eq!(hits.len(), 10);
        expected.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let want: Vec<_> = expected.iter().take(10).map(|e| (e.1, e.2)).collect();
        assert_eq!(hits, want);
    }

    #[test]
    fn rejects_zero_training_cells() {
        let params = CfarParams { train_cells: 0, ..Default::default() };
        assert!(cfar_2d(&map(4, 4, vec![0.0; 16]), &params).is_err());
    }
}
