use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Raised-cosine decay, 1 at `t = 0` and exactly 0 from `t = decay` on.
pub fn lambda(t: f64, decay: f64) -> f64 {
    let t = t.clamp(0.0, decay);
    if t == decay {
        return 0.0;
    }
    0.5 * (1.0 + (PI * t / decay).cos())
}

/// `∫₀ᵗ λ`, which saturates at `decay / 2`.
pub fn lambda_integral(t: f64, decay: f64) -> f64 {
    let t = t.clamp(0.0, decay);
    if t == decay {
        return 0.5 * decay;
    }
    0.5 * (t + decay / PI * (PI * t / decay).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuideVelocityState {
    /// m/s, signed along the rail.
    pub v_nom: f64,
    pub decay: f64,
    pub t_since_trigger: f64,
}

impl GuideVelocityState {
    pub fn new(v_nom: f64, decay: f64) -> Self {
        assert!(decay > 0.0, "decay must be positive");
        Self { v_nom, decay, t_since_trigger: 0.0 }
    }

    pub fn retrigger(&mut self, v_nom: f64) {
        self.v_nom = v_nom;
        self.t_since_trigger = 0.0;
    }
}

/// Commanded guide velocity `t` seconds after the last trigger.
pub fn guide_velocity(gvs: &GuideVelocityState, t: f64) -> f64 {
    gvs.v_nom * lambda(t, gvs.decay)
}
