use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::guide::{lambda, lambda_integral, GuideVelocityState};
use super::kinematics::{forward_kinematics, frame_origins, EndEffectorPose};
use super::trajectory::{plan_trajectory, Trajectory};
use super::{Config7, RobotConfig, RobotError, AXES};
use crate::synth::GestureClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveTrajectory {
    pub id: u64,
    pub label: String,
    /// Trajectory time reached so far, s.
    pub phase: f64,
    pub duration: f64,
}

/// Snapshot published to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub sim_time: f64,
    pub guide_pos: f64,
    pub joints: [f64; 6],
    pub gripper: f64,
    pub gripper_target: f64,
    pub speed_scale: f64,
    pub speed_target: f64,
    pub estopped: bool,
    /// Current guide velocity including speed scaling, m/s.
    pub guide_velocity: f64,
    pub guide: Option<GuideVelocityState>,
    pub active_trajectory: Option<ActiveTrajectory>,
    pub human_distance: Option<f64>,
}

impl RobotState {
    pub fn q(&self) -> Config7 {
        let mut q = [0.0; AXES];
        q[0] = self.guide_pos;
        q[1..].copy_from_slice(&self.joints);
        q
    }

    fn set_q(&mut self, q: &Config7) {
        self.guide_pos = q[0];
        self.joints.copy_from_slice(&q[1..]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum TrajectoryEnd {
    Finished,
    Cancelled,
}

/// Arm, guide and gripper advanced by [`Robot::step`].
///
/// Speed scaling dilates trajectory time: each step advances the phase by
/// the integral of the speed scale over the step, so the path is the same
/// at any scale and only its timing changes. The scale itself slews toward
/// its target at `1 / stop_ramp` per second.
#[derive(Debug, Clone)]
pub struct Robot {
    config: RobotConfig,
    state: RobotState,
    trajectory: Option<Trajectory>,
    next_id: u64,
    pub(super) last_end: Option<(u64, TrajectoryEnd)>,
    pub(super) skill: Option<(crate::bt::SkillSpec, super::skills::Pending)>,
    speed_override: f64,
    limit_events: u64,
    log: Vec<String>,
}

impl Robot {
    pub fn new(config: RobotConfig) -> Result<Self, RobotError> {
        config.validate()?;
        let mut state = RobotState {
            sim_time: 0.0,
            guide_pos: 0.0,
            joints: [0.0; 6],
            gripper: 1.0,
            gripper_target: 1.0,
            speed_scale: 1.0,
            speed_target: 1.0,
            estopped: false,
            guide_velocity: 0.0,
            guide: None,
            active_trajectory: None,
            human_distance: None,
        };
        state.set_q(&config.initial);
        Ok(Self {
            config,
            state,
            trajectory: None,
            next_id: 1,
            last_end: None,
            skill: None,
            speed_override: 1.0,
            limit_events: 0,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &RobotConfig {
        &self.config
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn q(&self) -> Config7 {
        self.state.q()
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.trajectory.as_ref()
    }

    /// Times a commanded position had to be clamped to a limit.
    pub fn limit_events(&self) -> u64 {
        self.limit_events
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    pub fn end_effector(&self) -> EndEffectorPose {
        forward_kinematics(&self.config, &self.q())
    }

    pub fn frame_origins(&self) -> Vec<[f64; 3]> {
        frame_origins(&self.config, &self.q())
    }

    pub fn is_moving(&self) -> bool {
        self.trajectory.is_some() || self.state.guide_velocity != 0.0
    }

    /// `true` once trajectory `id` has run to its end.
    pub fn trajectory_finished(&self, id: u64) -> bool {
        self.last_end == Some((id, TrajectoryEnd::Finished))
    }

    pub fn active_trajectory_id(&self) -> Option<u64> {
        self.state.active_trajectory.as_ref().map(|a| a.id)
    }

    /// Distance to the nearest person, `None` when nobody is tracked.
    pub fn set_human_distance(&mut self, distance: Option<f64>) {
        self.state.human_distance = distance;
        self.state.speed_target = self.speed_target();
    }

    pub fn set_speed_override(&mut self, fraction: f64) -> Result<(), RobotError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(RobotError::SpeedFraction(fraction));
        }
        self.speed_override = fraction;
        self.state.speed_target = self.speed_target();
        Ok(())
    }

    /// Ramps the speed scale to 0. The active trajectory is kept and resumes
    /// after [`Robot::release_estop`].
    pub fn emergency_stop(&mut self) {
        self.state.estopped = true;
        self.state.speed_target = 0.0;
    }

    pub fn release_estop(&mut self) {
        self.state.estopped = false;
        self.state.speed_target = self.speed_target();
    }

    fn speed_target(&self) -> f64 {
        if self.state.estopped {
            return 0.0;
        }
        let prox = self.state.human_distance.map_or(1.0, |d| self.config.proximity.scale(d));
        self.speed_override.min(prox)
    }

    pub fn set_gripper(&mut self, target: f64) {
        self.state.gripper_target = target.clamp(0.0, 1.0);
    }

    pub fn move_to(&mut self, target: &Config7, speed: f64, label: &str) -> Result<u64, RobotError> {
        if !(speed > 0.0 && speed <= 1.0) {
            return Err(RobotError::SpeedFraction(speed));
        }
        self.config.check_limits(target)?;
        let v: Config7 = std::array::from_fn(|k| self.config.v_max[k] * speed);
        let tr = plan_trajectory(&self.q(), target, &v, &self.config.a_max, self.config.step)?;
        Ok(self.execute(tr, label))
    }

    pub fn move_to_named(&mut self, pose: &str, speed: f64) -> Result<u64, RobotError> {
        let target = *self.config.poses.get(pose).ok_or_else(|| RobotError::UnknownPose(pose.to_string()))?;
        self.move_to(&target, speed, pose)
    }

    /// Moves to the stored trajectory's first point, then follows it.
    pub fn execute_named(&mut self, name: &str) -> Result<u64, RobotError> {
        let points = self.config.trajectories.get(name).ok_or_else(|| RobotError::UnknownTrajectory(name.to_string()))?;
        let stored = Trajectory::from_points(points)?;
        let v: Config7 = std::array::from_fn(|k| self.config.v_max[k] * 0.5);
        let approach = plan_trajectory(&self.q(), stored.start(), &v, &self.config.a_max, self.config.step)?;
        let tr = approach.then(&stored)?;
        Ok(self.execute(tr, name))
    }

    /// Replaces whatever is moving. The trajectory must start at the current
    /// configuration; callers normally go through the planners above.
    pub fn execute(&mut self, trajectory: Trajectory, label: &str) -> u64 {
        self.cancel_trajectory();
        self.state.guide = None;
        self.state.guide_velocity = 0.0;
        let id = self.next_id;
        self.next_id += 1;
        self.state.active_trajectory =
            Some(ActiveTrajectory { id, label: label.to_string(), phase: 0.0, duration: trajectory.duration() });
        self.trajectory = Some(trajectory);
        id
    }

    fn cancel_trajectory(&mut self) {
        if let Some(a) = self.state.active_trajectory.take() {
            self.last_end = Some((a.id, TrajectoryEnd::Cancelled));
        }
        self.trajectory = None;
    }

    /// Sets `v_nom` and restarts the decay clock. Cancels any trajectory.
    pub fn retrigger_guide(&mut self, v_nom: f64, decay: f64) {
        self.cancel_trajectory();
        match &mut self.state.guide {
            Some(g) if g.decay == decay => g.retrigger(v_nom),
            g => *g = Some(GuideVelocityState::new(v_nom, decay)),
        }
    }

    /// Looks `class` up in `mapping` and retriggers with its velocity.
    /// Unbound classes change nothing and return `false`.
    pub fn retrigger_mapped(&mut self, mapping: &BTreeMap<GestureClass, f64>, class: GestureClass, decay: f64) -> bool {
        match mapping.get(&class) {
            Some(v) => {
                self.retrigger_guide(*v, decay);
                true
            }
            None => {
                self.log.push(format!("no guide velocity bound to {class}"));
                false
            }
        }
    }

    /// Runs whole steps of the configured size covering `seconds`.
    pub fn advance(&mut self, seconds: f64) {
        let n = (seconds / self.config.step).round() as usize;
        for _ in 0..n {
            self.step(self.config.step);
        }
    }

    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0, "dt must be positive");
        let s0 = self.state.speed_scale;
        let target = self.speed_target();
        self.state.speed_target = target;
        let rate = 1.0 / self.config.stop_ramp;
        let diff = target - s0;
        // the relative slack lets a ramp of whole steps land on its target
        // despite rounding in the running scale
        let (s1, scaled_time) = if diff.abs() <= rate * dt * (1.0 + 1e-9) {
            let reach = (diff.abs() / rate).min(dt);
            (target, 0.5 * (s0 + target) * reach + target * (dt - reach))
        } else {
            let s1 = s0 + diff.signum() * rate * dt;
            (s1, 0.5 * (s0 + s1) * dt)
        };
        self.state.speed_scale = s1;

        if let (Some(tr), Some(active)) = (&self.trajectory, &mut self.state.active_trajectory) {
            active.phase = (active.phase + scaled_time).min(active.duration);
            let (q, _) = tr.sample(active.phase);
            let done = active.phase >= active.duration;
            let id = active.id;
            self.apply(q);
            if done {
                self.state.active_trajectory = None;
                self.trajectory = None;
                self.last_end = Some((id, TrajectoryEnd::Finished));
            }
        }

        if let Some(g) = &mut self.state.guide {
            let t0 = g.t_since_trigger;
            let t1 = t0 + dt;
            let disp = g.v_nom * (lambda_integral(t1, g.decay) - lambda_integral(t0, g.decay)) * (scaled_time / dt);
            g.t_since_trigger = t1;
            self.state.guide_velocity = g.v_nom * lambda(t1, g.decay) * s1;
            let mut q = self.q();
            q[0] += disp;
            self.apply(q);
        }

        let room = self.state.gripper_target - self.state.gripper;
        let max_move = self.config.gripper_rate * scaled_time;
        self.state.gripper = if room.abs() <= max_move { self.state.gripper_target } else { self.state.gripper + room.signum() * max_move };

        self.state.sim_time += dt;
    }

    fn apply(&mut self, mut q: Config7) {
        for (k, [min, max]) in self.config.limits().into_iter().enumerate() {
            if q[k] < min || q[k] > max {
                q[k] = q[k].clamp(min, max);
                self.limit_events += 1;
                if k == 0 {
                    self.state.guide_velocity = 0.0;
                }
            }
        }
        self.state.set_q(&q);
    }
}
