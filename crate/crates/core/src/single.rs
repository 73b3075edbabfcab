//! Alert-turn control for one pursuer against one evader.
//!
//! Outside the alert distance the evader flees along the pursuer-evader line
//! and the pursuer chases, slowing down whenever it has to turn towards the
//! evader. Inside the alert distance both agents decelerate into a sharp turn
//! whose rate grows as the gap closes, then accelerate out of it.

use serde::{Deserialize, Serialize};

use crate::agents::{AgentParams, AgentState, AlignBranch, ControlCommand, Phase, PhaseState, SpeedBranch};
use crate::error::{Error, Result};
use crate::math::{acot_pos, rel_angle, sat, sat2, sgn_fin, sign, wrap_finite, MathConfig};

/// Which way the evader breaks when the short-range maneuver starts, decided
/// from the heading difference between the two agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnRule {
    /// Turn clockwise when `wrap(theta_e - theta_p) > 0`, i.e. back towards
    /// the pursuer's heading. Chatters once the headings cross, so the
    /// evader ends up locked onto the pursuer's course.
    TowardPursuerHeading,
    /// Turn clockwise when `wrap(theta_p - theta_e) > 0`, i.e. further away
    /// from the pursuer's heading.
    #[default]
    AwayFromPursuerHeading,
}

impl TurnRule {
    /// `-1` for a clockwise break, `+1` otherwise.
    pub fn direction(self, theta_e: f64, theta_p: f64) -> f64 {
        let diff = match self {
            TurnRule::TowardPursuerHeading => wrap_finite(theta_e - theta_p),
            TurnRule::AwayFromPursuerHeading => wrap_finite(theta_p - theta_e),
        };
        if diff > 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Distance thresholds and pursuer alignment settings of an engagement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementConfig {
    /// Alert distance: at or below it both agents switch to the short-range maneuver.
    pub eps1: f64,
    /// Capture radius.
    pub eps2: f64,
    /// Heading error under which the long-range pursuer counts as facing its target.
    pub bar_theta: f64,
    /// Extra heading error tolerated before an aligned pursuer starts turning again.
    pub align_hysteresis: f64,
    #[serde(default)]
    pub turn_rule: TurnRule,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        Self {
            eps1: 1.4,
            eps2: 0.04,
            bar_theta: 0.1,
            align_hysteresis: 0.02,
            turn_rule: TurnRule::AwayFromPursuerHeading,
        }
    }
}

impl EngagementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps2 > 0.0 && self.eps2.is_finite()) {
            return Err(Error::Config(format!("engagement.eps2 must be > 0, got {}", self.eps2)));
        }
        if !(self.eps2 < self.eps1 && self.eps1.is_finite()) {
            return Err(Error::Config(format!(
                "engagement.eps2 must be smaller than engagement.eps1, got eps2={} eps1={}",
                self.eps2, self.eps1
            )));
        }
        if !(self.bar_theta > 0.0) {
            return Err(Error::Config(format!(
                "engagement.bar_theta must be > 0, got {}",
                self.bar_theta
            )));
        }
        if !(self.align_hysteresis >= 0.0) {
            return Err(Error::Config(format!(
                "engagement.align_hysteresis must be >= 0, got {}",
                self.align_hysteresis
            )));
        }
        Ok(())
    }
}

pub fn classify_phase(dist: f64, cfg: &EngagementConfig) -> Phase {
    if dist <= cfg.eps2 {
        Phase::Stopped
    } else if dist > cfg.eps1 {
        Phase::Long
    } else {
        Phase::Short
    }
}

/// Alignment branch with hysteresis: a turning pursuer becomes aligned once
/// the heading error is within `bar_theta`, an aligned one only starts
/// turning again past `bar_theta + align_hysteresis`.
pub fn align_branch(prev: AlignBranch, heading_err: f64, cfg: &EngagementConfig) -> AlignBranch {
    let err = heading_err.abs();
    match prev {
        AlignBranch::Aligned if err > cfg.bar_theta + cfg.align_hysteresis => AlignBranch::Turning,
        AlignBranch::Turning if err <= cfg.bar_theta => AlignBranch::Aligned,
        other => other,
    }
}

/// Heading error `wrap(theta - bearing(from -> to))`.
pub(crate) fn bearing_error(me: &AgentState, from: &AgentState, to: &AgentState) -> Result<f64> {
    let bearing = rel_angle(from.position(), to.position())?;
    Ok(wrap_finite(me.theta - bearing))
}

/// Long-range evader: accelerate to top speed and steer onto the line
/// pointing from the pursuer through the evader.
pub fn evader_long(
    e: &AgentState,
    ps: &PhaseState,
    p: &AgentState,
    params: &AgentParams,
    t: f64,
    math: &MathConfig,
) -> Result<ControlCommand> {
    let err = bearing_error(e, p, e)?;
    let v = sat(ps.ramp_up(params.a, t), params.v_max)?;
    let w = -sgn_fin(err, params.turn_cap(v), math.gamma)?;
    Ok(checked(ControlCommand::new(v, w), params))
}

/// Long-range pursuer speed for a given alignment branch.
pub fn pursuer_long_speed(ps: &PhaseState, params: &AgentParams, branch: AlignBranch, t: f64) -> Result<f64> {
    Ok(match branch {
        AlignBranch::Aligned => sat(ps.ramp_up(params.a, t), params.v_max)?,
        // sat2 only floors; the ramp starts at or below v_max.
        AlignBranch::Turning => sat2(ps.ramp_down(params.a, t), params.speed_floor()).min(params.v_max),
    })
}

/// Long-range pursuer: chase at top speed while facing the evader, slow
/// towards `c * v_max` while turning to face it.
pub fn pursuer_long(
    p: &AgentState,
    ps: &PhaseState,
    e: &AgentState,
    params: &AgentParams,
    cfg: &EngagementConfig,
    t: f64,
    math: &MathConfig,
) -> Result<ControlCommand> {
    let err = bearing_error(p, p, e)?;
    let branch = align_branch(ps.align_branch, err, cfg);
    let v = pursuer_long_speed(ps, params, branch, t)?;
    let w = -sgn_fin(err, params.turn_cap(v), math.gamma)?;
    Ok(checked(ControlCommand::new(v, w), params))
}

/// Short-range speed: ramp down to the floor, then (once the branch has been
/// latched to accelerating) ramp back up.
pub fn short_speed(ps: &PhaseState, params: &AgentParams, t: f64) -> Result<f64> {
    match ps.speed_branch {
        SpeedBranch::Decelerating => sat(ps.ramp_down(params.a, t).max(0.0), params.v_max),
        SpeedBranch::Accelerating => sat(ps.ramp_up(params.a, t), params.v_max),
    }
}

/// Turn-rate magnitude `sat(acot(k d) / v, min(r / v, w_max))`.
///
/// At standstill `acot(k d) / v` is unbounded and the result is `w_max`.
pub fn short_turn_magnitude(params: &AgentParams, dist: f64, v: f64) -> f64 {
    let raw = if v > 0.0 {
        acot_pos(params.k * dist) / v
    } else {
        f64::INFINITY
    };
    let cap = params.turn_cap(v);
    raw.clamp(0.0, cap)
}

/// Short-range evader maneuver.
pub fn evader_short(
    e: &AgentState,
    ps: &PhaseState,
    p: &AgentState,
    params: &AgentParams,
    dist: f64,
    t: f64,
    rule: TurnRule,
) -> Result<ControlCommand> {
    let v = short_speed(ps, params, t)?;
    let w = rule.direction(e.theta, p.theta) * short_turn_magnitude(params, dist, v);
    Ok(checked(ControlCommand::new(v, w), params))
}

/// Short-range pursuer maneuver: same ramp as the evader, turning in the
/// direction of this step's evader command `w_e`.
pub fn pursuer_short(ps: &PhaseState, params: &AgentParams, w_e: f64, dist: f64, t: f64) -> Result<ControlCommand> {
    let v = short_speed(ps, params, t)?;
    let w = sign(w_e) * short_turn_magnitude(params, dist, v);
    Ok(checked(ControlCommand::new(v, w), params))
}

/// Applies a phase transition or branch flip at time `t` with current speed
/// `v`, restarting the speed ramp from there.
///
/// A flip toggles the alignment branch in the long phase and the speed
/// branch in the short phase. `Stopped` is absorbing.
pub fn update_phase_bookkeeping(
    prev: &PhaseState,
    new_phase: Phase,
    branch_flip: bool,
    t: f64,
    v: f64,
) -> Result<PhaseState> {
    if t < prev.t_bar {
        return Err(Error::TimeRegression {
            from: prev.t_bar,
            to: t,
        });
    }
    if prev.phase == Phase::Stopped {
        return Ok(*prev);
    }
    let mut next = *prev;
    if new_phase != prev.phase {
        next.phase = new_phase;
        next.t_bar = t;
        next.v_at_t_bar = v;
        match (prev.phase, new_phase) {
            (Phase::Long, Phase::Short) => next.speed_branch = SpeedBranch::Decelerating,
            (Phase::Short, Phase::Long) => next.speed_branch = SpeedBranch::Accelerating,
            _ => {}
        }
    } else if branch_flip {
        next.t_bar = t;
        next.v_at_t_bar = v;
        match prev.phase {
            Phase::Long => {
                next.align_branch = match prev.align_branch {
                    AlignBranch::Aligned => AlignBranch::Turning,
                    AlignBranch::Turning => AlignBranch::Aligned,
                }
            }
            Phase::Short => {
                next.speed_branch = match prev.speed_branch {
                    SpeedBranch::Decelerating => SpeedBranch::Accelerating,
                    SpeedBranch::Accelerating => SpeedBranch::Decelerating,
                }
            }
            Phase::Stopped => {}
        }
    }
    Ok(next)
}

/// Brings an agent's bookkeeping up to date for this step: applies the phase
/// change, the pursuer's alignment flip (when `heading_err` is given) and the
/// decelerate-to-accelerate latch once the speed floor is reached.
pub fn advance_bookkeeping(
    prev: &PhaseState,
    new_phase: Phase,
    heading_err: Option<f64>,
    v_now: f64,
    params: &AgentParams,
    cfg: &EngagementConfig,
    t: f64,
) -> Result<PhaseState> {
    let mut ps = update_phase_bookkeeping(prev, new_phase, false, t, v_now)?;
    match ps.phase {
        Phase::Long => {
            if let Some(err) = heading_err {
                let branch = align_branch(ps.align_branch, err, cfg);
                if branch != ps.align_branch {
                    ps = update_phase_bookkeeping(&ps, Phase::Long, true, t, v_now)?;
                }
            }
        }
        Phase::Short => {
            if ps.speed_branch == SpeedBranch::Decelerating && v_now <= params.speed_floor() {
                ps = update_phase_bookkeeping(&ps, Phase::Short, true, t, v_now)?;
            }
        }
        Phase::Stopped => {}
    }
    Ok(ps)
}

fn checked(cmd: ControlCommand, params: &AgentParams) -> ControlCommand {
    debug_assert!(
        cmd.within(params) && cmd.v.is_finite() && cmd.w.is_finite(),
        "command {cmd:?} outside envelope {params:?}"
    );
    cmd
}
