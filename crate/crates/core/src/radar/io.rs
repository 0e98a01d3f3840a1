//! `RCUB1` cube files.
//!
//! ```text
//! "RCUB1"
//! u32 n_samples, u32 n_chirps, u32 n_channels
//! f64 sample_rate, chirp_slope, chirp_period, carrier_freq, antenna_spacing, frame_period
//! n_samples*n_chirps*n_channels × (f32 re, f32 im), [sample][chirp][channel] order
//! ```
//! All scalars little-endian. A file may hold several records back to back.

use std::io::{self, Read, Write};

use num_complex::Complex64;

use super::{RadarConfig, RadarCube, RadarError};

pub const CUBE_MAGIC: &[u8; 5] = b"RCUB1";

pub fn write_cube<W: Write>(out: &mut W, cube: &RadarCube) -> io::Result<()> {
    let c = cube.config();
    out.write_all(CUBE_MAGIC)?;
    for n in [c.n_samples, c.n_chirps, c.n_channels] {
        out.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in [c.sample_rate, c.chirp_slope, c.chirp_period, c.carrier_freq, c.antenna_spacing, c.frame_period] {
        out.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(cube.data().len() * 8);
    for z in cube.data() {
        buf.extend_from_slice(&(z.re as f32).to_le_bytes());
        buf.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    out.write_all(&buf)
}

/// Reads the next record; `Ok(None)` on a clean end of stream.
pub fn read_cube<R: Read>(input: &mut R) -> Result<Option<RadarCube>, RadarError> {
    let mut magic = [0u8; 5];
    let mut filled = 0;
    while filled < magic.len() {
        let n = input.read(&mut magic[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(RadarError::Format("truncated cube header".into()));
        }
        filled += n;
    }
    if &magic != CUBE_MAGIC {
        return Err(RadarError::Format(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
    }
    let mut u = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        input.read_exact(&mut u)?;
        *d = u32::from_le_bytes(u) as usize;
    }
    let mut f = [0u8; 8];
    let mut reals = [0f64; 6];
    for r in reals.iter_mut() {
        input.read_exact(&mut f)?;
        *r = f64::from_le_bytes(f);
    }
    let config = RadarConfig {
        n_samples: dims[0],
        n_chirps: dims[1],
        n_channels: dims[2],
        sample_rate: reals[0],
        chirp_slope: reals[1],
        chirp_period: reals[2],
        carrier_freq: reals[3],
        antenna_spacing: reals[4],
        frame_period: reals[5],
    };
    config.validate()?;
    let mut raw = vec![0u8; config.cube_len() * 8];
    input.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    RadarCube::from_vec(config, data).map(Some)
}

/// Reads every record in the stream.
pub fn read_cubes<R: Read>(input: &mut R) -> Result<Vec<RadarCube>, RadarError> {
    let mut cubes = Vec::new();
    while let Some(c) = read_cube(input)? {
        cubes.push(c);
    }
    Ok(cubes)
}
