//! Where radar frames come from: a live synthetic scene or a cube file.

use std::collections::VecDeque;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use gesture_cell::radar::{io as cube_io, RadarConfig, RadarCube};
use gesture_cell::synth::{
    derive_seed, random_script, Environment, EnvironmentProfile, GestureClass, GestureScript, Hand, HandModel, SceneSim,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::GatewayError;

/// Frames between the end of one played gesture and the start of the next:
/// enough for the segmenter to close the window (5) and sit out its
/// refractory period (10).
pub const MIN_GAP_FRAMES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    /// Synthetic scene in one of the environment presets. The hand only
    /// appears when a gesture is played.
    SyntheticLive { environment: Environment, seed: u64 },
    /// `RCUB1` cube stream played once, then an empty radar.
    FileReplay { path: PathBuf },
}

struct Playing {
    hand: Hand,
    script: GestureScript,
    frame: usize,
    frames: usize,
}

pub struct LiveScene {
    scene: SceneSim,
    hand_model: HandModel,
    script_rng: ChaCha8Rng,
    queue: VecDeque<GestureClass>,
    playing: Option<Playing>,
    quiet: usize,
}

impl LiveScene {
    pub fn new(radar: RadarConfig, environment: Environment, seed: u64) -> Result<Self, GatewayError> {
        Ok(Self {
            scene: SceneSim::new(radar, EnvironmentProfile::preset(environment), seed)?,
            hand_model: HandModel::default(),
            script_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5C)),
            queue: VecDeque::new(),
            playing: None,
            quiet: MIN_GAP_FRAMES,
        })
    }

    /// Queues a gesture with a freshly drawn script.
    pub fn play(&mut self, class: GestureClass) {
        self.queue.push_back(class);
    }

    /// No gesture in progress or queued.
    pub fn is_idle(&self) -> bool {
        self.playing.is_none() && self.queue.is_empty()
    }

    /// Frames since the last gesture ended.
    pub fn quiet_frames(&self) -> usize {
        self.quiet
    }

    pub fn next_frame(&mut self) -> Result<RadarCube, GatewayError> {
        if self.playing.is_none() && self.quiet >= MIN_GAP_FRAMES {
            if let Some(class) = self.queue.pop_front() {
                let script = random_script(class, &mut self.script_rng);
                let frames = script.frame_count(self.scene.config().frame_period);
                let hand = Hand::sample(self.hand_model, self.scene.hand_rng());
                self.playing = Some(Playing { hand, script, frame: 0, frames });
            }
        }
        let reflectors = match &mut self.playing {
            Some(p) => {
                let t = (p.frame as f64 * self.scene.config().frame_period).min(p.script.duration);
                let r = p.hand.scatterers(&p.script, t, self.scene.hand_rng())?;
                p.frame += 1;
                r
            }
            None => Vec::new(),
        };
        if self.playing.as_ref().is_some_and(|p| p.frame >= p.frames) {
            self.playing = None;
            self.quiet = 0;
        } else if self.playing.is_none() {
            self.quiet += 1;
        }
        Ok(self.scene.next_frame(&reflectors)?)
    }
}

pub struct FileReplay {
    cubes: VecDeque<RadarCube>,
    total: usize,
}

impl FileReplay {
    pub fn open(path: &Path, radar: &RadarConfig) -> Result<Self, GatewayError> {
        let file = File::open(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        let cubes = cube_io::read_cubes(&mut BufReader::new(file))?;
        if let Some(c) = cubes.iter().find(|c| c.config() != radar) {
            return Err(GatewayError::Config(format!(
                "{} holds {}x{}x{} cubes, pipeline expects {}x{}x{}",
                path.display(),
                c.config().n_samples,
                c.config().n_chirps,
                c.config().n_channels,
                radar.n_samples,
                radar.n_chirps,
                radar.n_channels
            )));
        }
        Ok(Self { total: cubes.len(), cubes: cubes.into() })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn remaining(&self) -> usize {
        self.cubes.len()
    }

    /// `None` once the file is exhausted.
    pub fn next_frame(&mut self) -> Option<RadarCube> {
        self.cubes.pop_front()
    }
}

pub enum FrameSource {
    Live(Box<LiveScene>),
    File(FileReplay),
}

impl FrameSource {
    pub fn open(config: &SourceConfig, radar: &RadarConfig) -> Result<Self, GatewayError> {
        Ok(match config {
            SourceConfig::SyntheticLive { environment, seed } => {
                FrameSource::Live(Box::new(LiveScene::new(*radar, *environment, *seed)?))
            }
            SourceConfig::FileReplay { path } => FrameSource::File(FileReplay::open(path, radar)?),
        })
    }

    /// `Ok(None)` means no radar returns this frame.
    pub fn next_frame(&mut self) -> Result<Option<RadarCube>, GatewayError> {
        match self {
            FrameSource::Live(s) => s.next_frame().map(Some),
            FrameSource::File(f) => Ok(f.next_frame()),
        }
    }

    pub fn is_idle(&self) -> bool {
        match self {
            FrameSource::Live(s) => s.is_idle() && s.quiet_frames() >= MIN_GAP_FRAMES,
            FrameSource::File(f) => f.remaining() == 0,
        }
    }
}
