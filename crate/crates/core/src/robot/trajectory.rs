use serde::{Deserialize, Serialize};

use super::{Config7, RobotError, TimedPoint, AXES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub q: Config7,
    /// Velocity used for the cubic Hermite segments on either side.
    pub v: Config7,
}

/// Time-parameterised path through configuration space, cubic Hermite
/// between waypoints. Times start at 0 and strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, RobotError> {
        let Some(first) = waypoints.first() else {
            return Err(RobotError::Trajectory("no waypoints".into()));
        };
        if first.t != 0.0 {
            return Err(RobotError::Trajectory("first waypoint must be at t = 0".into()));
        }
        if waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(RobotError::Trajectory("waypoint times must strictly increase".into()));
        }
        Ok(Self { waypoints })
    }

    /// Velocities from a shape-preserving rule: zero at the ends and at
    /// local extrema, harmonic mean of neighbouring slopes elsewhere.
    pub fn from_points(points: &[TimedPoint]) -> Result<Self, RobotError> {
        let n = points.len();
        let mut waypoints: Vec<Waypoint> = points.iter().map(|p| Waypoint { t: p.t, q: p.q, v: [0.0; AXES] }).collect();
        for i in 1..n.saturating_sub(1) {
            for a in 0..AXES {
                let d0 = (points[i].q[a] - points[i - 1].q[a]) / (points[i].t - points[i - 1].t);
                let d1 = (points[i + 1].q[a] - points[i].q[a]) / (points[i + 1].t - points[i].t);
                waypoints[i].v[a] = if d0 * d1 <= 0.0 { 0.0 } else { 2.0 * d0 * d1 / (d0 + d1) };
            }
        }
        Self::new(waypoints)
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn start(&self) -> &Config7 {
        &self.waypoints[0].q
    }

    pub fn end(&self) -> &Config7 {
        &self.waypoints[self.waypoints.len() - 1].q
    }

    pub fn duration(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t
    }

    /// Position and velocity at `t`, clamped to `[0, duration]`.
    pub fn sample(&self, t: f64) -> (Config7, Config7) {
        let w = &self.waypoints;
        if t <= 0.0 || w.len() == 1 {
            return (w[0].q, if w.len() == 1 { [0.0; AXES] } else { w[0].v });
        }
        if t >= self.duration() {
            let last = &w[w.len() - 1];
            return (last.q, last.v);
        }
        let i = w.partition_point(|p| p.t <= t) - 1;
        let (a, b) = (&w[i], &w[i + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (h00, h10, h01, h11) = (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2);
        let (d00, d10, d01, d11) = (6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s);
        let mut q = [0.0; AXES];
        let mut v = [0.0; AXES];
        for k in 0..AXES {
            q[k] = h00 * a.q[k] + h10 * h * a.v[k] + h01 * b.q[k] + h11 * h * b.v[k];
            v[k] = (d00 * a.q[k] + d01 * b.q[k]) / h + d10 * a.v[k] + d11 * b.v[k];
        }
        (q, v)
    }

    /// `self` followed by `next`, which must start where `self` ends.
    pub fn then(mut self, next: &Trajectory) -> Result<Self, RobotError> {
        let gap = self.end().iter().zip(next.start()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap > 1e-9 {
            return Err(RobotError::Trajectory(format!("segments are {gap} apart")));
        }
        let offset = self.duration();
        let last = self.waypoints.len() - 1;
        self.waypoints[last].v = next.waypoints[0].v;
        self.waypoints.extend(next.waypoints[1..].iter().map(|w| Waypoint { t: w.t + offset, ..*w }));
        Ok(self)
    }
}

/// Synchronised trapezoidal move from `from` to `to`, sampled every `step`
/// seconds plus a final waypoint at the end time.
///
/// All axes follow `from + Δ·s(t)` for one normalised profile `s`, whose
/// rate and acceleration are capped by the tightest axis, so every axis
/// stays within its own `v_max` and `a_max`.
pub fn plan_trajectory(
    from: &Config7,
    to: &Config7,
    v_max: &Config7,
    a_max: &Config7,
    step: f64,
) -> Result<Trajectory, RobotError> {
    if !(step > 0.0) {
        return Err(RobotError::Trajectory("step must be positive".into()));
    }
    let delta: Config7 = std::array::from_fn(|k| to[k] - from[k]);
    let (mut rate, mut accel) = (f64::INFINITY, f64::INFINITY);
    for k in 0..AXES {
        if delta[k] != 0.0 {
            rate = rate.min(v_max[k] / delta[k].abs());
            accel = accel.min(a_max[k] / delta[k].abs());
        }
    }
    if rate.is_infinite() {
        return Trajectory::new(vec![Waypoint { t: 0.0, q: *from, v: [0.0; AXES] }]);
    }
    let profile = UnitTrapezoid::new(rate, accel);
    let total = profile.duration;
    let mut times: Vec<f64> = (0..).map(|i| i as f64 * step).take_while(|t| *t < total).collect();
    if total - times[times.len() - 1] < 1e-9 * step.max(1.0) {
        times.pop();
    }
    times.push(total);
    let waypoints = times
        .into_iter()
        .map(|t| {
            let (s, ds) = if t == total { (1.0, 0.0) } else { profile.at(t) };
            Waypoint {
                t,
                q: std::array::from_fn(|k| if t == total { to[k] } else { from[k] + delta[k] * s }),
                v: std::array::from_fn(|k| delta[k] * ds),
            }
        })
        .collect();
    Trajectory::new(waypoints)
}

/// Minimum-time 0 → 1 profile under rate and acceleration caps.
#[derive(Debug, Clone, Copy)]
struct UnitTrapezoid {
    peak: f64,
    accel: f64,
    ramp: f64,
    duration: f64,
}

impl UnitTrapezoid {
    fn new(rate: f64, accel: f64) -> Self {
        if rate * rate / accel < 1.0 {
            Self { peak: rate, accel, ramp: rate / accel, duration: 1.0 / rate + rate / accel }
        } else {
            let ramp = (1.0 / accel).sqrt();
            Self { peak: accel * ramp, accel, ramp, duration: 2.0 * ramp }
        }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.duration);
        if t < self.ramp {
            (0.5 * self.accel * t * t, self.accel * t)
        } else if t <= self.duration - self.ramp {
            (0.5 * self.accel * self.ramp * self.ramp + self.peak * (t - self.ramp), self.peak)
        } else {
            let r = self.duration - t;
            (1.0 - 0.5 * self.accel * r * r, self.accel * r)
        }
    }
}
