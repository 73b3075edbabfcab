//! State, capability and command types for a single unicycle robot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{wrap_finite, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pursuer,
    Evader,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Pursuer => "pursuer",
            Role::Evader => "evader",
        }
    }
}

/// Pose and current forward speed of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    /// Heading, kept in `(-pi, pi]`.
    pub theta: f64,
    /// Last commanded forward speed. Never negative.
    pub v: f64,
}

impl AgentState {
    pub fn new(id: usize, role: Role, x: f64, y: f64, theta: f64) -> Self {
        Self {
            id,
            role,
            x,
            y,
            theta: wrap_finite(theta),
            v: 0.0,
        }
    }

    pub fn with_speed(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn position(&self) -> Position {
        Position::new(self.x, self.y)
    }

    pub fn distance_to(&self, other: &AgentState) -> f64 {
        self.position().distance(other.position())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite() && self.v.is_finite()
    }
}

/// Capability envelope and steering gain of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// Maximum forward speed.
    pub v_max: f64,
    /// Maximum turn rate.
    pub w_max: f64,
    /// Maximum centripetal acceleration; caps the turn rate at `r / v`.
    pub r: f64,
    /// Tangential acceleration used by every speed ramp.
    pub a: f64,
    /// Deceleration floor as a fraction of `v_max`.
    pub c: f64,
    /// Gain of the short-range steering profile `acot(k * d)`.
    pub k: f64,
}

impl AgentParams {
    pub fn validate(&self, what: &str) -> Result<()> {
        let check = |ok: bool, key: &str, rule: &str, val: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{what}.{key} must satisfy {rule}, got {val}")))
            }
        };
        check(
            self.v_max > 0.0 && self.v_max.is_finite(),
            "v_max",
            "v_max > 0",
            self.v_max,
        )?;
        check(
            self.w_max > 0.0 && self.w_max.is_finite(),
            "w_max",
            "w_max > 0",
            self.w_max,
        )?;
        check(self.r > 0.0 && self.r.is_finite(), "r", "r > 0", self.r)?;
        check(self.a >= 0.0 && self.a.is_finite(), "a", "a >= 0", self.a)?;
        check((0.0..1.0).contains(&self.c), "c", "0 <= c < 1", self.c)?;
        check(self.k >= 0.0 && self.k.is_finite(), "k", "k >= 0", self.k)?;
        Ok(())
    }

    /// Slowest speed reached while decelerating.
    pub fn speed_floor(&self) -> f64 {
        self.c * self.v_max
    }

    /// Turn-rate cap `min(r / v, w_max)`; at standstill the cap is `w_max`.
    pub fn turn_cap(&self, v: f64) -> f64 {
        if v > 0.0 {
            (self.r / v).min(self.w_max)
        } else {
            self.w_max
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub w: f64,
}

impl ControlCommand {
    pub const STOP: ControlCommand = ControlCommand { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    /// Clamps into `[0, v_max] x [-w_max, w_max]`.
    pub fn clamped(self, params: &AgentParams) -> Self {
        Self {
            v: self.v.clamp(0.0, params.v_max),
            w: self.w.clamp(-params.w_max, params.w_max),
        }
    }

    pub fn within(&self, params: &AgentParams) -> bool {
        (0.0..=params.v_max).contains(&self.v) && self.w.abs() <= params.w_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Long,
    Short,
    Stopped,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Long => "long",
            Phase::Short => "short",
            Phase::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeedBranch {
    Decelerating,
    Accelerating,
}

/// Long-range pursuer speed branch: ramp up while facing the target,
/// slow down while turning towards it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignBranch {
    Aligned,
    Turning,
}

/// Speed-ramp bookkeeping. `t_bar` is the time of the last acceleration or
/// deceleration event and `v_at_t_bar` the speed at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phase: Phase,
    pub t_bar: f64,
    pub v_at_t_bar: f64,
    pub speed_branch: SpeedBranch,
    pub align_branch: AlignBranch,
}

impl PhaseState {
    pub fn initial(v0: f64) -> Self {
        Self {
            phase: Phase::Long,
            t_bar: 0.0,
            v_at_t_bar: v0,
            speed_branch: SpeedBranch::Accelerating,
            align_branch: AlignBranch::Aligned,
        }
    }

    /// Speed after ramping up for `t - t_bar` seconds (unsaturated).
    pub fn ramp_up(&self, a: f64, t: f64) -> f64 {
        self.v_at_t_bar + a * (t - self.t_bar)
    }

    /// Speed after ramping down for `t - t_bar` seconds (unsaturated).
    pub fn ramp_down(&self, a: f64, t: f64) -> f64 {
        self.v_at_t_bar - a * (t - self.t_bar)
    }
}

/// Time derivative of a pose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseRate {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

/// Unicycle kinematics: `(v cos(theta), v sin(theta), w)`.
pub fn unicycle_derivative(state: &AgentState, cmd: ControlCommand) -> PoseRate {
    unicycle_rate(state.theta, cmd)
}

pub(crate) fn unicycle_rate(theta: f64, cmd: ControlCommand) -> PoseRate {
    let (s, c) = theta.sin_cos();
    PoseRate {
        dx: cmd.v * c,
        dy: cmd.v * s,
        dtheta: cmd.w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn at(theta: f64) -> AgentState {
        AgentState::new(0, Role::Evader, 0.0, 0.0, theta)
    }

    #[test]
    fn derivative_examples() {
        let d = unicycle_derivative(&at(0.0), ControlCommand::new(1.0, 0.0));
        assert_eq!((d.dx, d.dy, d.dtheta), (1.0, 0.0, 0.0));

        let d = unicycle_derivative(&at(FRAC_PI_2), ControlCommand::new(2.0, 0.5));
        assert_abs_diff_eq!(d.dx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dy, 2.0, epsilon = 1e-15);
        assert_eq!(d.dtheta, 0.5);

        let d = unicycle_derivative(&at(1.3), ControlCommand::STOP);
        assert_eq!((d.dx, d.dy, d.dtheta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn speed_is_preserved() {
        for k in 0..64 {
            let theta = -3.0 + k as f64 * 0.1;
            let d = unicycle_derivative(&at(theta), ControlCommand::new(0.7, 0.3));
            assert_abs_diff_eq!(d.dx.hypot(d.dy), 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_turn_traces_circle() {
        let (v, w, dt) = (0.6, 1.5, 1e-4);
        let mut s = at(0.0);
        let cmd = ControlCommand::new(v, w);
        let radius = v / w;
        // center sits to the left of the initial heading
        let center = Position::new(0.0, radius);
        for _ in 0..40_000 {
            let d = unicycle_derivative(&s, cmd);
            s.x += d.dx * dt;
            s.y += d.dy * dt;
            s.theta = wrap_finite(s.theta + d.dtheta * dt);
            let err = (s.position().distance(center) - radius).abs();
            assert!(err <= dt * v * 10.0, "radius drift {err}");
        }
    }

    #[test]
    fn params_validation() {
        let ok = AgentParams {
            v_max: 1.0,
            w_max: 1.0,
            r: 0.1,
            a: 0.6,
            c: 0.3,
            k: 5.0,
        };
        assert!(ok.validate("p").is_ok());
        let bad = AgentParams { c: 1.2, ..ok };
        let err = bad.validate("evader").unwrap_err().to_string();
        assert!(err.contains("evader.c"), "{err}");
        assert!(AgentParams { v_max: 0.0, ..ok }.validate("p").is_err());
    }

    #[test]
    fn turn_cap_at_rest_is_w_max() {
        let p = AgentParams {
            v_max: 1.0,
            w_max: 2.0,
            r: 0.2,
            a: 0.3,
            c: 0.1,
            k: 5.0,
        };
        assert_eq!(p.turn_cap(0.0), 2.0);
        assert_abs_diff_eq!(p.turn_cap(0.45), 0.2 / 0.45, epsilon = 1e-15);
        assert_eq!(p.turn_cap(0.05), 2.0);
    }
}
