use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{gesture_trajectory, GestureScript, SynthError};
use crate::radar::{RadarConfig, RadarCube, SPEED_OF_LIGHT};

/// Point reflector in the radar's horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub amplitude: f64,
}

impl Scatterer {
    pub fn new(position: [f64; 2], velocity: [f64; 2], amplitude: f64) -> Self {
        Self { position, velocity, amplitude }
    }

    pub fn range(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    /// sin of the azimuth, positive towards +x.
    pub fn sin_azimuth(&self) -> f64 {
        self.position[0] / self.range()
    }

    /// Radial speed, positive when closing on the radar.
    pub fn approach_speed(&self) -> f64 {
        let r = self.range();
        -(self.velocity[0] * self.position[0] + self.velocity[1] * self.position[1]) / r
    }

    fn validate(&self) -> Result<(), SynthError> {
        let finite = self.position.iter().chain(&self.velocity).all(|v| v.is_finite());
        if !finite || !(self.position[1] > 0.0) || !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(SynthError::InvalidScatterer(*self));
        }
        Ok(())
    }
}

/// Beat-signal cube for a set of point targets plus circular complex noise
/// (`noise_std` is the std-dev of |n|).
pub fn synth_cube(
    scatterers: &[Scatterer],
    config: &RadarConfig,
    noise_std: f64,
    seed: u64,
) -> Result<RadarCube, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth_cube_with(scatterers, config, noise_std, &mut rng)
}

pub(crate) fn synth_cube_with<R: Rng>(
    scatterers: &[Scatterer],
    config: &RadarConfig,
    noise_std: f64,
    rng: &mut R,
) -> Result<RadarCube, SynthError> {
    let mut cube = RadarCube::zeros(*config)?;
    let (ns, nc, nk) = (config.n_samples, config.n_chirps, config.n_channels);
    let lambda = config.wavelength();

    let mut fast = vec![Complex64::new(0.0, 0.0); ns];
    let mut slow = vec![Complex64::new(0.0, 0.0); nc];
    let mut chan = vec![Complex64::new(0.0, 0.0); nk];
    let mut slow_chan = vec![Complex64::new(0.0, 0.0); nc * nk];

    for s in scatterers {
        s.validate()?;
        if s.amplitude == 0.0 {
            continue;
        }
        let beat = 2.0 * config.chirp_slope * s.range() / SPEED_OF_LIGHT;
        let doppler = 2.0 * s.approach_speed() / lambda;
        let spatial = config.antenna_spacing * s.sin_azimuth();
        for (n, z) in fast.iter_mut().enumerate() {
            *z = Complex64::from_polar(s.amplitude, 2.0 * PI * beat * n as f64 / config.sample_rate);
        }
        for (m, z) in slow.iter_mut().enumerate() {
            *z = Complex64::from_polar(1.0, 2.0 * PI * doppler * m as f64 * config.chirp_period);
        }
        for (k, z) in chan.iter_mut().enumerate() {
            *z = Complex64::from_polar(1.0, 2.0 * PI * spatial * k as f64);
        }
        for m in 0..nc {
            for k in 0..nk {
                slow_chan[m * nk + k] = slow[m] * chan[k];
            }
        }
        for (n, block) in cube.data_mut().chunks_exact_mut(nc * nk).enumerate() {
            let a = fast[n];
            for (dst, sc) in block.iter_mut().zip(&slow_chan) {
                *dst += a * sc;
            }
        }
    }

    if noise_std > 0.0 {
        let sigma = noise_std / std::f64::consts::SQRT_2;
        for z in cube.data_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z += Complex64::new(re * sigma, im * sigma);
        }
    }
    Ok(cube)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    HandOnly,
    HandPlusHuman,
    HandHumanArmBehind,
}

impl Environment {
    pub const ALL: [Environment; 3] = [Environment::HandOnly, Environment::HandPlusHuman, Environment::HandHumanArmBehind];

    pub fn name(self) -> &'static str {
        match self {
            Environment::HandOnly => "hand_only",
            Environment::HandPlusHuman => "hand_plus_human",
            Environment::HandHumanArmBehind => "hand_human_arm_behind",
        }
    }

    pub fn is_noisy(self) -> bool {
        self != Environment::HandOnly
    }
}

impl std::str::FromStr for Environment {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == norm)
            .ok_or_else(|| SynthError::UnknownEnvironment(s.to_string()))
    }
}

/// Everything in the scene that is not the gesturing hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentProfile {
    pub kind: Environment,
    pub static_clutter: Vec<Scatterer>,
    /// Reflectivity of the swaying bystander; 0 disables it.
    pub interferer_amplitude: f64,
    /// Std-dev of the per-frame velocity kick of the bystander, m/s.
    pub interferer_motion_std: f64,
    pub interferer_anchor: [f64; 2],
    pub noise_std: f64,
}

impl EnvironmentProfile {
    pub fn preset(kind: Environment) -> Self {
        let base = Self {
            kind,
            static_clutter: Vec::new(),
            interferer_amplitude: 0.0,
            interferer_motion_std: 0.0,
            interferer_anchor: [-0.1, 0.85],
            noise_std: 1.0,
        };
        // Torso and shoulders of a person standing behind the operator's hand.
        let torso = vec![
            Scatterer::new([-0.1, 0.85], [0.0, 0.0], 1.5),
            Scatterer::new([0.08, 0.9], [0.0, 0.0], 1.0),
        ];
        match kind {
            Environment::HandOnly => base,
            Environment::HandPlusHuman => Self {
                static_clutter: torso,
                interferer_amplitude: 0.3,
                interferer_motion_std: 0.005,
                ..base
            },
            Environment::HandHumanArmBehind => {
                let mut clutter = torso;
                clutter.push(Scatterer::new([0.3, 1.05], [0.0, 0.0], 1.2));
                clutter.push(Scatterer::new([0.4, 1.0], [0.0, 0.0], 0.8));
                Self {
                    static_clutter: clutter,
                    interferer_amplitude: 0.3,
                    interferer_motion_std: 0.006,
                    noise_std: 1.15,
                    ..base
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.kind == Environment::HandOnly && self.interferer_amplitude != 0.0 {
            return Err(SynthError::InvalidEnvironment("hand-only scenes cannot carry an interferer".into()));
        }
        if !(self.noise_std >= 0.0) || !(self.interferer_amplitude >= 0.0) || !(self.interferer_motion_std >= 0.0) {
            return Err(SynthError::InvalidEnvironment("negative amplitude or std-dev".into()));
        }
        for s in &self.static_clutter {
            s.validate()?;
        }
        Ok(())
    }
}

/// Point-cloud model of a hand: a few reflectors around the path centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    pub min_scatterers: usize,
    pub max_scatterers: usize,
    /// Fixed offset spread of reflectors around the centroid, metres.
    pub offset_std: f64,
    pub amplitude_range: (f64, f64),
    /// Per-frame velocity spread of individual reflectors, m/s.
    pub velocity_jitter: f64,
}

impl Default for HandModel {
    fn default() -> Self {
        Self {
            min_scatterers: 3,
            max_scatterers: 5,
            offset_std: 0.015,
            amplitude_range: (0.4, 0.8),
            velocity_jitter: 0.12,
        }
    }
}

/// One hand instance: reflector offsets and strengths fixed for a gesture.
#[derive(Debug, Clone, PartialEq)]
pub struct Hand {
    points: Vec<([f64; 2], f64)>,
    model: HandModel,
}

impl Hand {
    pub fn sample<R: Rng>(model: HandModel, rng: &mut R) -> Self {
        let n = rng.random_range(model.min_scatterers..=model.max_scatterers);
        let offset = Normal::new(0.0, model.offset_std.max(0.0)).expect("finite std");
        let (lo, hi) = model.amplitude_range;
        let points = (0..n)
            .map(|_| {
                let o = [offset.sample(rng), offset.sample(rng)];
                let a = if hi > lo { rng.random_range(lo..hi) } else { lo };
                (o, a)
            })
            .collect();
        Self { points, model }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reflectors at one instant of the gesture.
    pub fn scatterers<R: Rng>(&self, script: &GestureScript, t: f64, rng: &mut R) -> Result<Vec<Scatterer>, SynthError> {
        let (centre, vel) = gesture_trajectory(script, t)?;
        let jitter = Normal::new(0.0, script.jitter).map_err(|e| SynthError::InvalidScript(e.to_string()))?;
        let vj = Normal::new(0.0, self.model.velocity_jitter).map_err(|e| SynthError::InvalidScript(e.to_string()))?;
        Ok(self
            .points
            .iter()
            .map(|(o, a)| {
                let p = [centre[0] + o[0] + jitter.sample(rng), (centre[1] + o[1] + jitter.sample(rng)).max(0.02)];
                let v = [vel[0] + vj.sample(rng), vel[1] + vj.sample(rng)];
                Scatterer::new(p, v, *a)
            })
            .collect())
    }
}

/// Frame-by-frame scene generator with persistent bystander motion.
///
/// Hand, environment and receiver noise draw from separate streams of the
/// same seed, so the hand and the noise are identical across environments.
#[derive(Debug, Clone)]
pub struct SceneSim {
    config: RadarConfig,
    env: EnvironmentProfile,
    hand_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    interferer_pos: [f64; 2],
    interferer_vel: [f64; 2],
}

impl SceneSim {
    const HAND_STREAM: u64 = 1;
    const ENV_STREAM: u64 = 2;
    const NOISE_STREAM: u64 = 3;

    pub fn new(config: RadarConfig, env: EnvironmentProfile, seed: u64) -> Result<Self, SynthError> {
        config.validate()?;
        env.validate()?;
        let stream = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Ok(Self {
            interferer_pos: env.interferer_anchor,
            interferer_vel: [0.0, 0.0],
            config,
            env,
            hand_rng: stream(Self::HAND_STREAM),
            env_rng: stream(Self::ENV_STREAM),
            noise_rng: stream(Self::NOISE_STREAM),
        })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn environment(&self) -> &EnvironmentProfile {
        &self.env
    }

    pub fn hand_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.hand_rng
    }

    fn advance_environment(&mut self) -> Vec<Scatterer> {
        let mut out = self.env.static_clutter.clone();
        if self.env.interferer_amplitude > 0.0 {
            let dt = self.config.frame_period;
            let kick = Normal::new(0.0, self.env.interferer_motion_std).expect("validated std");
            for axis in 0..2 {
                let pull = self.env.interferer_anchor[axis] - self.interferer_pos[axis];
                self.interferer_vel[axis] = 0.85 * self.interferer_vel[axis] + 0.5 * pull + kick.sample(&mut self.env_rng);
                self.interferer_pos[axis] += self.interferer_vel[axis] * dt;
            }
            out.push(Scatterer::new(self.interferer_pos, self.interferer_vel, self.env.interferer_amplitude));
        }
        out
    }

    /// Next frame: environment advanced one period, plus optional hand reflectors.
    pub fn next_frame(&mut self, hand: &[Scatterer]) -> Result<RadarCube, SynthError> {
        let mut scatterers = self.advance_environment();
        scatterers.extend_from_slice(hand);
        synth_cube_with(&scatterers, &self.config, self.env.noise_std, &mut self.noise_rng)
    }
}

/// Radar frames covering one gesture in the given environment.
pub fn synth_gesture_sequence(
    script: &GestureScript,
    env: &EnvironmentProfile,
    config: &RadarConfig,
    hand_model: &HandModel,
    seed: u64,
) -> Result<Vec<RadarCube>, SynthError> {
    script.validate()?;
    let frames = script.frame_count(config.frame_period);
    if frames > crate::net::MAX_FRAMES {
        return Err(SynthError::TooManyFrames { frames, max: crate::net::MAX_FRAMES });
    }
    let mut scene = SceneSim::new(*config, env.clone(), seed)?;
    let hand = Hand::sample(*hand_model, scene.hand_rng());
    (0..frames)
        .map(|i| {
            let t = (i as f64 * config.frame_period).min(script.duration);
            let reflectors = hand.scatterers(script, t, scene.hand_rng())?;
            scene.next_frame(&reflectors)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GestureClass;

    #[test]
    fn empty_scene_without_noise_is_zero() {
        let cube = synth_cube(&[], &RadarConfig::default(), 0.0, 3).unwrap();
        assert!(cube.data().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn same_seed_same_cube() {
        let s = [Scatterer::new([0.1, 0.4], [0.0, -0.5], 1.0)];
        let cfg = RadarConfig::default();
        assert_eq!(synth_cube(&s, &cfg, 1.0, 9).unwrap(), synth_cube(&s, &cfg, 1.0, 9).unwrap());
        assert_ne!(synth_cube(&s, &cfg, 1.0, 9).unwrap(), synth_cube(&s, &cfg, 1.0, 10).unwrap());
    }

    #[test]
    fn rejects_target_behind_radar() {
        let s = [Scatterer::new([0.1, -0.4], [0.0, 0.0], 1.0)];
        assert!(synth_cube(&s, &RadarConfig::default(), 0.0, 0).is_err());
    }

    #[test]
    fn hand_only_has_no_interferer() {
        let mut env = EnvironmentProfile::preset(Environment::HandOnly);
        assert!(env.validate().is_ok());
        env.interferer_amplitude = 0.2;
        assert!(env.validate().is_err());
    }

    #[test]
    fn sequence_length_and_buffer_limit() {
        let cfg = RadarConfig::default();
        let env = EnvironmentProfile::preset(Environment::HandOnly);
        let mut script = GestureScript::new(GestureClass::SwipeLeft);
        script.duration = 1.0;
        let cubes = synth_gesture_sequence(&script, &env, &cfg, &HandModel::default(), 1).unwrap();
        assert_eq!(cubes.len(), 25);
        script.duration = 2.2;
        assert!(matches!(
            synth_gesture_sequence(&script, &env, &cfg, &HandModel::default(), 1),
            Err(SynthError::TooManyFrames { frames: 55, .. })
        ));
    }

    #[test]
    fn environment_names_parse() {
        for e in Environment::ALL {
            assert_eq!(e.name().parse::<Environment>().unwrap(), e);
        }
        assert_eq!("hand-plus-human".parse::<Environment>().unwrap(), Environment::HandPlusHuman);
    }
}
