//! `GNET1` checkpoints, all little-endian:
//!
//! ```text
//! "GNET1"
//! u32 n_classes, f32 dropout
//! u32 frames, features, conv1, conv2, conv3, dense
//! f64 × 5 normalisation means, f64 × 5 normalisation stds
//! u64 parameter count
//! f32 × count  (conv1a w, b, conv1b w, b, conv2 w, b, conv3 w, b, dense w, b, out w, b)
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Architecture, NetError, Network, Normalization};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"GNET1";

/// Everything inference needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub normalization: Normalization,
}

pub fn write_checkpoint<W: Write>(out: &mut W, ckpt: &Checkpoint) -> io::Result<()> {
    let net = &ckpt.network;
    let a = net.architecture();
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(a.n_classes as u32).to_le_bytes())?;
    out.write_all(&(net.dropout() as f32).to_le_bytes())?;
    for v in [a.frames, a.features, a.conv1, a.conv2, a.conv3, a.dense] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in ckpt.normalization.mean.iter().chain(&ckpt.normalization.std) {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&(net.params().len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(net.params().len() * 4);
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf)
}

fn take<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N], NetError> {
    let mut b = [0u8; N];
    input.read_exact(&mut b).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => NetError::Checkpoint("file is truncated".into()),
        _ => NetError::Io(e),
    })?;
    Ok(b)
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<Checkpoint, NetError> {
    let magic: [u8; 5] = take(input)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NetError::Checkpoint(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
    }
    let u32v = |b: [u8; 4]| u32::from_le_bytes(b) as usize;
    let n_classes = u32v(take(input)?);
    let dropout = f32::from_le_bytes(take(input)?) as f64;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = u32v(take(input)?);
    }
    let arch = Architecture {
        frames: dims[0],
        features: dims[1],
        conv1: dims[2],
        conv2: dims[3],
        conv3: dims[4],
        dense: dims[5],
        n_classes,
    };
    arch.validate()?;
    let mut normalization = Normalization::identity();
    for v in normalization.mean.iter_mut().chain(normalization.std.iter_mut()) {
        *v = f64::from_le_bytes(take(input)?);
    }
    let count = u64::from_le_bytes(take(input)?) as usize;
    if count != arch.param_count() {
        return Err(NetError::Checkpoint(format!(
            "header declares {count} parameters, architecture needs {}",
            arch.param_count()
        )));
    }
    let mut raw = vec![0u8; count * 4];
    input.read_exact(&mut raw).map_err(|_| NetError::Checkpoint("file is truncated".into()))?;
    let params = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let network = Network::from_params(arch, dropout, params)?;
    Ok(Checkpoint { network, normalization })
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let mut out = BufWriter::new(File::create(path)?);
        write_checkpoint(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let file = File::open(path).map_err(|e| NetError::Checkpoint(format!("{}: {e}", path.display())))?;
        read_checkpoint(&mut BufReader::new(file))
    }
}
