use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SynthError;

/// The nine operator gestures, with stable integer codes in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureClass {
    #[serde(rename = "swipe_left")]
    SwipeLeft,
    #[serde(rename = "swipe_right")]
    SwipeRight,
    #[serde(rename = "up")]
    Up,
    #[serde(rename = "down")]
    Down,
    #[serde(rename = "swipe_cw")]
    SwipeCW,
    #[serde(rename = "swipe_ccw")]
    SwipeCCW,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "x")]
    X,
}

impl GestureClass {
    pub const COUNT: usize = 9;

    pub const ALL: [GestureClass; 9] = [
        GestureClass::SwipeLeft,
        GestureClass::SwipeRight,
        GestureClass::Up,
        GestureClass::Down,
        GestureClass::SwipeCW,
        GestureClass::SwipeCCW,
        GestureClass::S,
        GestureClass::Z,
        GestureClass::X,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Snake-case identifier used on the wire and in configs.
    pub fn name(self) -> &'static str {
        match self {
            GestureClass::SwipeLeft => "swipe_left",
            GestureClass::SwipeRight => "swipe_right",
            GestureClass::Up => "up",
            GestureClass::Down => "down",
            GestureClass::SwipeCW => "swipe_cw",
            GestureClass::SwipeCCW => "swipe_ccw",
            GestureClass::S => "s",
            GestureClass::Z => "z",
            GestureClass::X => "x",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == lower)
            .ok_or_else(|| SynthError::UnknownGesture(s.to_string()))
    }
}

/// Monotone time warp of the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedProfile {
    Linear,
    /// 3u² − 2u³
    #[default]
    SmoothStep,
    /// 10u³ − 15u⁴ + 6u⁵
    MinimumJerk,
}

impl SpeedProfile {
    pub const ALL: [SpeedProfile; 3] = [SpeedProfile::Linear, SpeedProfile::SmoothStep, SpeedProfile::MinimumJerk];

    /// (value, derivative) at `u` in [0, 1].
    pub fn eval(self, u: f64) -> (f64, f64) {
        match self {
            SpeedProfile::Linear => (u, 1.0),
            SpeedProfile::SmoothStep => (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u)),
            SpeedProfile::MinimumJerk => quintic(u),
        }
    }
}

fn quintic(u: f64) -> (f64, f64) {
    let u2 = u * u;
    (u2 * u * (10.0 - 15.0 * u + 6.0 * u2), 30.0 * u2 * (1.0 - u) * (1.0 - u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureScript {
    pub class: GestureClass,
    /// Seconds.
    pub duration: f64,
    /// Bounding size of the hand path, metres.
    pub extent: f64,
    /// Path centre (x, y) in metres; y is distance in front of the radar.
    pub center: [f64; 2],
    /// Per-frame positional jitter std-dev of each hand scatterer, metres.
    pub jitter: f64,
    pub speed_profile: SpeedProfile,
}

impl GestureScript {
    pub const MIN_DURATION: f64 = 0.5;
    pub const MAX_DURATION: f64 = 2.5;

    pub fn new(class: GestureClass) -> Self {
        Self {
            class,
            duration: 1.2,
            extent: 0.25,
            center: [0.0, 0.35],
            jitter: 0.005,
            speed_profile: SpeedProfile::SmoothStep,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(Self::MIN_DURATION..=Self::MAX_DURATION).contains(&self.duration) {
            return Err(SynthError::InvalidScript(format!(
                "duration {} s outside [{}, {}]",
                self.duration,
                Self::MIN_DURATION,
                Self::MAX_DURATION
            )));
        }
        if !(self.extent > 0.05 && self.extent < 0.5) {
            return Err(SynthError::InvalidScript(format!("extent {} m outside (0.05, 0.5)", self.extent)));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(SynthError::InvalidScript(format!("jitter {} must be >= 0", self.jitter)));
        }
        let half = self.extent / 2.0;
        if self.center[1] - half <= 0.0 {
            return Err(SynthError::InvalidScript("path reaches behind the radar".into()));
        }
        Ok(())
    }

    /// Number of radar frames needed to cover the gesture.
    pub fn frame_count(&self, frame_period: f64) -> usize {
        ((self.duration / frame_period) - 1e-9).ceil().max(1.0) as usize
    }
}

const Z_TEMPLATE: &[[f64; 2]] = &[[-0.5, 0.5], [0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]];
const S_TEMPLATE: &[[f64; 2]] = &[[0.5, 0.5], [-0.5, 0.5], [-0.5, 0.0], [0.5, 0.0], [0.5, -0.5], [-0.5, -0.5]];
const X_TEMPLATE: &[[f64; 2]] = &[[-0.5, 0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, -0.5]];

/// Unit-scale path at arc parameter `s` in [0, 1]: (position, d position / ds),
/// relative to the path centre.
fn unit_path(class: GestureClass, s: f64) -> ([f64; 2], [f64; 2]) {
    match class {
        GestureClass::SwipeRight => ([s - 0.5, 0.0], [1.0, 0.0]),
        GestureClass::SwipeLeft => ([0.5 - s, 0.0], [-1.0, 0.0]),
        // Up comes towards the radar (y decreasing).
        GestureClass::Up => ([0.0, 0.5 - s], [0.0, -1.0]),
        GestureClass::Down => ([0.0, s - 0.5], [0.0, 1.0]),
        GestureClass::SwipeCW | GestureClass::SwipeCCW => {
            let dir = if class == GestureClass::SwipeCW { -1.0 } else { 1.0 };
            let phi = PI / 2.0 + dir * 2.0 * PI * s;
            let dphi = dir * 2.0 * PI;
            ([0.5 * phi.cos(), 0.5 * phi.sin()], [-0.5 * phi.sin() * dphi, 0.5 * phi.cos() * dphi])
        }
        GestureClass::S => polyline(S_TEMPLATE, s),
        GestureClass::Z => polyline(Z_TEMPLATE, s),
        GestureClass::X => polyline(X_TEMPLATE, s),
    }
}

/// Strokes get time in proportion to their length and each stroke eases in
/// and out, so the hand pauses at corners and velocity stays continuous.
fn polyline(points: &[[f64; 2]], s: f64) -> ([f64; 2], [f64; 2]) {
    let lengths: Vec<f64> = points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).collect();
    let total: f64 = lengths.iter().sum();
    let mut start = 0.0;
    for (i, len) in lengths.iter().enumerate() {
        let frac = len / total;
        let last = i == lengths.len() - 1;
        if s <= start + frac || last {
            let tau = ((s - start) / frac).clamp(0.0, 1.0);
            let (q, dq) = quintic(tau);
            let (a, b) = (points[i], points[i + 1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            return ([a[0] + d[0] * q, a[1] + d[1] * q], [d[0] * dq / frac, d[1] * dq / frac]);
        }
        start += frac;
    }
    unreachable!("polyline templates have at least two points")
}

/// Hand centroid (position, velocity) at time `t` into the gesture.
pub fn gesture_trajectory(script: &GestureScript, t: f64) -> Result<([f64; 2], [f64; 2]), SynthError> {
    if !(0.0..=script.duration).contains(&t) {
        return Err(SynthError::TimeOutOfRange { t, duration: script.duration });
    }
    let (u, du) = script.speed_profile.eval(t / script.duration);
    let (p, dp) = unit_path(script.class, u);
    let e = script.extent;
    let scale = e * du / script.duration;
    Ok((
        [script.center[0] + e * p[0], script.center[1] + e * p[1]],
        [dp[0] * scale, dp[1] * scale],
    ))
}
