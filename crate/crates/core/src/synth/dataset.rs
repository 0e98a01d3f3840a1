//! Labelled synthetic gesture datasets.
//!
//! On disk a dataset is a directory holding `manifest.json` and one file per
//! sample under `samples/`, either `FDET1` detection sequences or
//! concatenated `RCUB1` cubes.
//!
//! `FDET1` layout (little-endian):
//! ```text
//! "FDET1" u32 frame_count
//! frame_count × { u32 n, n × (f32 peak, f32 range, f32 doppler, f32 x, f32 y) }
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synth_gesture_sequence, Environment, EnvironmentProfile, GestureClass, GestureScript, HandModel, SpeedProfile, SynthError};
use crate::radar::{extract_frame, io as cube_io, Detection, DspParams, FrameDetections, RadarConfig, RadarCube};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const DETECTIONS_MAGIC: &[u8; 5] = b"FDET1";

/// Share of each noisy (class, environment) group held out for testing.
pub const TEST_FRACTION: f64 = 0.3;
/// Share of the remaining data used for training; the rest validates.
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreFormat {
    /// Post-DSP point clouds (`FDET1`).
    Detections,
    /// Raw radar cubes (`RCUB1`), one record per frame.
    Cubes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub clean_per_class: usize,
    /// Per class and per noisy environment.
    pub noisy_per_class: usize,
    pub seed: u64,
    pub radar: RadarConfig,
    pub dsp: DspParams,
    pub hand: HandModel,
    pub store: StoreFormat,
}

impl DatasetSpec {
    /// Desk scale: 200 clean and 40 per noisy setting, per class.
    pub fn desk(seed: u64) -> Self {
        Self {
            clean_per_class: 200,
            noisy_per_class: 40,
            seed,
            radar: RadarConfig::default(),
            dsp: DspParams::default(),
            hand: HandModel::default(),
            store: StoreFormat::Detections,
        }
    }

    /// Ten times desk scale: 2000 clean and 200 per noisy setting, per class.
    pub fn full_scale(seed: u64) -> Self {
        Self { clean_per_class: 2000, noisy_per_class: 200, ..Self::desk(seed) }
    }

    pub fn count(&self, env: Environment) -> usize {
        if env.is_noisy() {
            self.noisy_per_class
        } else {
            self.clean_per_class
        }
    }

    pub fn total(&self) -> usize {
        GestureClass::COUNT * Environment::ALL.iter().map(|e| self.count(*e)).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub class: GestureClass,
    pub environment: Environment,
    pub split: Split,
    pub script: GestureScript,
    pub frames: usize,
    /// Relative to the dataset directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub radar: RadarConfig,
    pub dsp: DspParams,
    pub hand: HandModel,
    pub store: StoreFormat,
    /// class name → environment name → samples.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn ids(&self, split: Split) -> Vec<usize> {
        self.samples.iter().filter(|s| s.split == split).map(|s| s.id).collect()
    }

    /// Test split is 30% of every noisy group and nothing else; the rest of
    /// each class splits train:val at 7:3.
    pub fn check_splits(&self) -> Result<(), SynthError> {
        let mut groups: BTreeMap<(GestureClass, Environment), Vec<Split>> = BTreeMap::new();
        for s in &self.samples {
            groups.entry((s.class, s.environment)).or_default().push(s.split);
        }
        let mut per_class_rest: BTreeMap<GestureClass, (usize, usize)> = BTreeMap::new();
        for ((class, env), splits) in &groups {
            let test = splits.iter().filter(|s| **s == Split::Test).count();
            let want = if env.is_noisy() { (splits.len() as f64 * TEST_FRACTION).round() as usize } else { 0 };
            if test != want {
                return Err(SynthError::Manifest(format!("{class}/{}: {test} test samples, expected {want}", env.name())));
            }
            let e = per_class_rest.entry(*class).or_default();
            e.0 += splits.iter().filter(|s| **s == Split::Train).count();
            e.1 += splits.iter().filter(|s| **s == Split::Val).count();
        }
        for (class, (train, val)) in per_class_rest {
            let want = ((train + val) as f64 * TRAIN_FRACTION).round() as usize;
            if train != want {
                return Err(SynthError::Manifest(format!("{class}: {train} train samples, expected {want}")));
            }
        }
        Ok(())
    }
}

/// Independent seed per (dataset seed, sample id) via splitmix64.
pub fn derive_seed(seed: u64, id: u64) -> u64 {
    let mut z = seed ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random but plausible execution of a gesture class.
pub fn random_script<R: Rng>(class: GestureClass, rng: &mut R) -> GestureScript {
    GestureScript {
        class,
        duration: rng.random_range(0.8..2.0),
        extent: rng.random_range(0.15..0.3),
        center: [rng.random_range(-0.05..0.05), rng.random_range(0.3..0.4)],
        jitter: rng.random_range(0.003..0.008),
        speed_profile: SpeedProfile::ALL[rng.random_range(0..SpeedProfile::ALL.len())],
    }
}

/// Assigns ids, scripts and splits without synthesising anything.
pub fn plan_dataset(spec: &DatasetSpec) -> DatasetManifest {
    let mut samples = Vec::with_capacity(spec.total());
    let mut counts = BTreeMap::new();
    for class in GestureClass::ALL {
        let per_env: &mut BTreeMap<String, usize> = counts.entry(class.name().to_string()).or_default();
        for env in Environment::ALL {
            per_env.insert(env.name().to_string(), spec.count(env));
            for _ in 0..spec.count(env) {
                let id = samples.len();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, id as u64));
                let script = random_script(class, &mut rng);
                samples.push(SampleEntry {
                    id,
                    class,
                    environment: env,
                    split: Split::Train,
                    frames: script.frame_count(spec.radar.frame_period),
                    script,
                    file: sample_file_name(id, spec.store),
                });
            }
        }
    }

    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX));
    for class in GestureClass::ALL {
        let mut rest = Vec::new();
        for env in Environment::ALL {
            let mut group: Vec<usize> =
                samples.iter().filter(|s| s.class == class && s.environment == env).map(|s| s.id).collect();
            group.shuffle(&mut split_rng);
            let n_test = if env.is_noisy() { (group.len() as f64 * TEST_FRACTION).round() as usize } else { 0 };
            for id in &group[..n_test] {
                samples[*id].split = Split::Test;
            }
            rest.extend_from_slice(&group[n_test..]);
        }
        rest.shuffle(&mut split_rng);
        let n_train = (rest.len() as f64 * TRAIN_FRACTION).round() as usize;
        for (i, id) in rest.iter().enumerate() {
            samples[*id].split = if i < n_train { Split::Train } else { Split::Val };
        }
    }

    DatasetManifest {
        version: MANIFEST_VERSION,
        seed: spec.seed,
        radar: spec.radar,
        dsp: spec.dsp,
        hand: spec.hand,
        store: spec.store,
        counts,
        samples,
    }
}

fn sample_file_name(id: usize, store: StoreFormat) -> String {
    match store {
        StoreFormat::Detections => format!("samples/{id:06}.fdet"),
        StoreFormat::Cubes => format!("samples/{id:06}.rcub"),
    }
}

/// Synthesises the cubes of one manifest entry.
pub fn sample_cubes(manifest: &DatasetManifest, entry: &SampleEntry) -> Result<Vec<RadarCube>, SynthError> {
    let env = EnvironmentProfile::preset(entry.environment);
    synth_gesture_sequence(&entry.script, &env, &manifest.radar, &manifest.hand, derive_seed(manifest.seed, entry.id as u64))
}

/// Cubes → point clouds with the manifest's DSP settings.
pub fn cubes_to_detections(cubes: &[RadarCube], dsp: &DspParams) -> Result<Vec<FrameDetections>, SynthError> {
    cubes
        .iter()
        .enumerate()
        .map(|(i, c)| extract_frame(c, dsp, i as u64).map_err(SynthError::from))
        .collect()
}

pub fn sample_detections(manifest: &DatasetManifest, entry: &SampleEntry) -> Result<Vec<FrameDetections>, SynthError> {
    cubes_to_detections(&sample_cubes(manifest, entry)?, &manifest.dsp)
}

/// Point clouds of every sample, indexed by id, without touching disk.
pub fn generate_in_memory(spec: &DatasetSpec) -> Result<(DatasetManifest, Vec<Vec<FrameDetections>>), SynthError> {
    let manifest = plan_dataset(spec);
    let frames = manifest
        .samples
        .par_iter()
        .map(|e| sample_detections(&manifest, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, frames))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_path_buf(), source }
}

/// Writes manifest and sample files under `dir`.
pub fn generate_dataset(spec: &DatasetSpec, dir: &Path) -> Result<DatasetManifest, SynthError> {
    if spec.clean_per_class == 0 || spec.noisy_per_class == 0 {
        return Err(SynthError::Manifest("sample counts must be > 0".into()));
    }
    let manifest = plan_dataset(spec);
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;

    manifest.samples.par_iter().try_for_each(|entry| -> Result<(), SynthError> {
        let path = dir.join(&entry.file);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(file);
        let cubes = sample_cubes(&manifest, entry)?;
        match manifest.store {
            StoreFormat::Cubes => {
                for c in &cubes {
                    cube_io::write_cube(&mut out, c).map_err(io_err(&path))?;
                }
            }
            StoreFormat::Detections => {
                let frames = cubes_to_detections(&cubes, &manifest.dsp)?;
                write_detections(&mut out, &frames).map_err(io_err(&path))?;
            }
        }
        out.flush().map_err(io_err(&path))
    })?;

    write_manifest(&manifest, dir)?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<(), SynthError> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).map_err(|e| SynthError::Manifest(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, SynthError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| SynthError::Manifest(format!("{}: {e}", path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(SynthError::Manifest(format!("unsupported manifest version {}", manifest.version)));
    }
    Ok(manifest)
}

/// Manifest plus the point clouds of every sample (cube datasets are run
/// through the DSP chain on load).
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<Vec<FrameDetections>>), SynthError> {
    let manifest = read_manifest(dir)?;
    let frames = manifest
        .samples
        .par_iter()
        .map(|entry| {
            let path: PathBuf = dir.join(&entry.file);
            let mut input = BufReader::new(File::open(&path).map_err(io_err(&path))?);
            match manifest.store {
                StoreFormat::Detections => read_detections(&mut input).map_err(io_err(&path)),
                StoreFormat::Cubes => {
                    let cubes = cube_io::read_cubes(&mut input)?;
                    cubes_to_detections(&cubes, &manifest.dsp)
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, frames))
}

pub fn write_detections<W: Write>(out: &mut W, frames: &[FrameDetections]) -> io::Result<()> {
    out.write_all(DETECTIONS_MAGIC)?;
    out.write_all(&(frames.len() as u32).to_le_bytes())?;
    for f in frames {
        out.write_all(&(f.detections.len() as u32).to_le_bytes())?;
        for d in &f.detections {
            for v in d.features() {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_detections<R: Read>(input: &mut R) -> io::Result<Vec<FrameDetections>> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != DETECTIONS_MAGIC {
        return Err(bad("not an FDET1 file"));
    }
    let mut u = [0u8; 4];
    input.read_exact(&mut u)?;
    let n_frames = u32::from_le_bytes(u) as usize;
    let mut frames = Vec::with_capacity(n_frames.min(4096));
    for i in 0..n_frames {
        input.read_exact(&mut u)?;
        let n = u32::from_le_bytes(u) as usize;
        let mut raw = vec![0u8; n * 20];
        input.read_exact(&mut raw)?;
        let detections = raw
            .chunks_exact(20)
            .map(|c| {
                let f = |k: usize| f32::from_le_bytes([c[4 * k], c[4 * k + 1], c[4 * k + 2], c[4 * k + 3]]) as f64;
                Detection { peak: f(0), range: f(1), doppler: f(2), x: f(3), y: f(4) }
            })
            .collect();
        frames.push(FrameDetections { frame_index: i as u64, detections });
    }
    Ok(frames)
}
