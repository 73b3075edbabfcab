//! Group-aware control for several pursuers and evaders.
//!
//! Evaders are split into a main group and stragglers. Main-group evaders
//! blend a formation-keeping command with an individual escape command
//! (weighted by the selfish parameter `alpha`); stragglers blend a rejoin
//! command with an escape command weighted by how close the nearest pursuer
//! is. Pursuers chase their assigned target with a heading bias away from
//! nearby peers, and periodically reconsider which evader to chase.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentParams, AgentState, ControlCommand, PhaseState};
use crate::error::{Error, Result};
use crate::math::{rel_angle, sgn_fin, wrap_finite, MathConfig, Position};
use crate::single::{align_branch, bearing_error, evader_short, pursuer_long_speed, pursuer_short, EngagementConfig};

/// Tuning of the multi-agent laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiConfig {
    /// Selfish parameter: 0 is pure formation keeping, 1 pure individual escape.
    pub alpha: f64,
    /// Decay rate of the straggler escape weight beyond the alert distance.
    pub k_beta: f64,
    /// Gain of the inter-pursuer repulsion term.
    pub m_rep: f64,
    /// Pursuers closer than this repel each other.
    pub d_safe: f64,
    /// How often desired formation clearances are re-measured; `None` keeps
    /// the initial ones.
    pub d_des_update_period: Option<f64>,
    /// Straggler distance threshold; `None` means twice the mean clearance.
    pub iso_threshold: Option<f64>,
}

impl Default for MultiConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            k_beta: 0.5,
            m_rep: 0.1,
            d_safe: 0.8,
            d_des_update_period: None,
            iso_threshold: None,
        }
    }
}

impl MultiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "multi.alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.d_safe > 0.0) {
            return Err(Error::Config(format!("multi.d_safe must be > 0, got {}", self.d_safe)));
        }
        if !(self.m_rep >= 0.0) {
            return Err(Error::Config(format!("multi.m_rep must be >= 0, got {}", self.m_rep)));
        }
        if !(self.k_beta >= 0.0) {
            return Err(Error::Config(format!("multi.k_beta must be >= 0, got {}", self.k_beta)));
        }
        if let Some(p) = self.d_des_update_period {
            if !(p > 0.0) {
                return Err(Error::Config(format!("multi.d_des_update_period must be > 0, got {p}")));
            }
        }
        if let Some(th) = self.iso_threshold {
            if !(th > 0.0) {
                return Err(Error::Config(format!("multi.iso_threshold must be > 0, got {th}")));
            }
        }
        Ok(())
    }
}

/// Formation bookkeeping for the evader team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub main_members: BTreeSet<usize>,
    pub isolated_members: BTreeSet<usize>,
    /// Desired clearance of each member to the formation center.
    pub d_des_per_member: BTreeMap<usize, f64>,
    pub iso_threshold: f64,
}

impl GroupState {
    /// Everyone starts in the main group with their initial distance to the
    /// initial center as desired clearance.
    pub fn from_initial(evaders: &[AgentState], iso_threshold: Option<f64>) -> Result<Self> {
        let center = Position::centroid(evaders.iter().map(AgentState::position))
            .ok_or_else(|| Error::Config("at least one evader is required".into()))?;
        let d_des_per_member: BTreeMap<usize, f64> =
            evaders.iter().map(|e| (e.id, e.position().distance(center))).collect();
        if evaders.len() > 1 {
            if let Some((id, _)) = d_des_per_member.iter().find(|(_, d)| **d <= 0.0) {
                return Err(Error::Config(format!(
                    "evader {id} starts exactly at the group center; desired clearance must be > 0"
                )));
            }
        }
        let iso_threshold = match iso_threshold {
            Some(th) => th,
            None => {
                let mean = d_des_per_member.values().sum::<f64>() / d_des_per_member.len() as f64;
                if mean > 0.0 {
                    2.0 * mean
                } else {
                    f64::INFINITY
                }
            }
        };
        Ok(Self {
            main_members: evaders.iter().map(|e| e.id).collect(),
            isolated_members: BTreeSet::new(),
            d_des_per_member,
            iso_threshold,
        })
    }

    pub fn d_des(&self, id: usize) -> f64 {
        self.d_des_per_member.get(&id).copied().unwrap_or(0.0)
    }

    /// Re-measures desired clearances of the main-group members.
    pub fn refresh_d_des(&mut self, evaders: &[AgentState]) {
        let Some(center) = main_center(evaders, &self.main_members, None) else {
            return;
        };
        for e in evaders.iter().filter(|e| self.main_members.contains(&e.id)) {
            let d = e.position().distance(center);
            if d > 0.0 {
                self.d_des_per_member.insert(e.id, d);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupEvent {
    Isolated(usize),
    Rejoined(usize),
}

/// Centroid of the main-group members, optionally leaving one out.
pub fn main_center(evaders: &[AgentState], members: &BTreeSet<usize>, exclude: Option<usize>) -> Option<Position> {
    Position::centroid(
        evaders
            .iter()
            .filter(|e| members.contains(&e.id) && Some(e.id) != exclude)
            .map(AgentState::position),
    )
}

/// Updates the main/straggler partition.
///
/// An evader that just finished a short-range maneuver (listed in
/// `ended_short`) becomes a straggler when it is farther than the threshold
/// from the center of the remaining main group; a straggler rejoins once it
/// is back within the threshold. Captured evaders leave both groups.
pub fn classify_groups(
    evaders: &[AgentState],
    group: &GroupState,
    captured: &BTreeSet<usize>,
    ended_short: &[usize],
) -> (GroupState, Vec<GroupEvent>) {
    let mut next = group.clone();
    let mut events = Vec::new();
    next.main_members.retain(|id| !captured.contains(id));
    next.isolated_members.retain(|id| !captured.contains(id));

    for &id in ended_short {
        if !next.main_members.contains(&id) {
            continue;
        }
        let Some(e) = evaders.iter().find(|e| e.id == id) else {
            continue;
        };
        let Some(center) = main_center(evaders, &next.main_members, Some(id)) else {
            continue;
        };
        if e.position().distance(center) > next.iso_threshold {
            next.main_members.remove(&id);
            next.isolated_members.insert(id);
            events.push(GroupEvent::Isolated(id));
        }
    }

    let stragglers: Vec<usize> = next.isolated_members.iter().copied().collect();
    for id in stragglers {
        let Some(e) = evaders.iter().find(|e| e.id == id) else {
            continue;
        };
        let Some(center) = main_center(evaders, &next.main_members, None) else {
            continue;
        };
        if e.position().distance(center) <= next.iso_threshold {
            next.isolated_members.remove(&id);
            next.main_members.insert(id);
            events.push(GroupEvent::Rejoined(id));
        }
    }
    (next, events)
}

/// Formation-keeping command of a main-group evader together with the
/// logistic weight `sigma` (1 at the desired clearance, above 1 when too
/// close to the center, towards 0 when too far).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregation {
    pub v: f64,
    pub w: f64,
    pub sigma: f64,
}

pub fn aggregation_sigma(d_des: f64, dist_to_center: f64) -> f64 {
    2.0 / (1.0 + (-(d_des * d_des - dist_to_center * dist_to_center)).exp())
}

pub fn aggregation_cmd(
    e: &AgentState,
    center: Position,
    d_des: f64,
    pursuer: &AgentState,
    params: &AgentParams,
) -> Result<Aggregation> {
    let pos = e.position();
    let to_center = rel_angle(pos, center)?;
    let pursuer_to_center = rel_angle(pursuer.position(), center)?;
    let sigma = aggregation_sigma(d_des, pos.distance(center));
    let (s, c) = e.theta.sin_cos();
    let along = (e.x - center.x) * c + (e.y - center.y) * s;
    let v = (-(1.0 - sigma) * along + params.v_max).clamp(0.0, params.v_max);
    let blended = (1.0 - sigma) * to_center + sigma * pursuer_to_center;
    let w = -wrap_finite(e.theta - blended);
    Ok(Aggregation { v, w, sigma })
}

/// Individual escape: ramp up and turn proportionally onto the line from
/// the pursuer through the evader.
pub fn escape_cmd(
    e: &AgentState,
    ps: &PhaseState,
    pursuer: &AgentState,
    params: &AgentParams,
    t: f64,
) -> Result<ControlCommand> {
    let err = bearing_error(e, pursuer, e)?;
    Ok(ControlCommand::new(
        ps.ramp_up(params.a, t).clamp(0.0, params.v_max),
        -err,
    ))
}

/// Straggler rejoin: ramp up and turn proportionally towards the main group center.
pub fn join_cmd(
    e: &AgentState,
    ps: &PhaseState,
    main_center: Position,
    params: &AgentParams,
    t: f64,
) -> Result<ControlCommand> {
    let bearing = rel_angle(e.position(), main_center)?;
    let err = wrap_finite(e.theta - bearing);
    Ok(ControlCommand::new(
        ps.ramp_up(params.a, t).clamp(0.0, params.v_max),
        -err,
    ))
}

/// Escape weight of a straggler: 1 within the alert distance, decaying
/// exponentially beyond it.
pub fn beta_weight(dist: f64, k_beta: f64, eps1: f64) -> f64 {
    (-k_beta * (dist - eps1).max(0.0)).exp()
}

/// `(1 - weight) * first + weight * second`, clamped to the envelope.
/// Weights 0 and 1 return the clamped endpoint itself (the arithmetic form
/// can turn a `-0.0` into `0.0`).
pub fn blend(first: ControlCommand, second: ControlCommand, weight: f64, params: &AgentParams) -> ControlCommand {
    let mixed = if weight == 0.0 {
        first
    } else if weight == 1.0 {
        second
    } else {
        ControlCommand::new(
            (1.0 - weight) * first.v + weight * second.v,
            (1.0 - weight) * first.w + weight * second.w,
        )
    };
    mixed.clamped(params)
}

pub fn blend_main(agg: ControlCommand, esc: ControlCommand, alpha: f64, params: &AgentParams) -> ControlCommand {
    blend(agg, esc, alpha, params)
}

pub fn blend_isolated(joi: ControlCommand, esc: ControlCommand, beta: f64, params: &AgentParams) -> ControlCommand {
    blend(joi, esc, beta, params)
}

/// Sum of peer repulsion terms `(m / d) * bearing(me -> peer)` over peers
/// closer than `d_safe`. `me` itself is skipped.
pub fn repulsion(me: &AgentState, peers: &[AgentState], cfg: &MultiConfig) -> Result<f64> {
    let mut sum = 0.0;
    for peer in peers.iter().filter(|p| p.id != me.id) {
        let d = me.distance_to(peer);
        if d < cfg.d_safe {
            let bearing = rel_angle(me.position(), peer.position())
                .map_err(|_| Error::DegenerateGeometry(format!("pursuers {} and {} coincide", me.id, peer.id)))?;
            sum += cfg.m_rep / d * bearing;
        }
    }
    Ok(sum)
}

/// Long-range pursuer with peer repulsion. Speed follows the single-pursuer
/// law; the heading error fed to the finite-time sign is biased by the
/// repulsion sum.
#[allow(clippy::too_many_arguments)]
pub fn pursuer_long_multi(
    p: &AgentState,
    ps: &PhaseState,
    target: &AgentState,
    peers: &[AgentState],
    params: &AgentParams,
    cfg: &MultiConfig,
    eng: &EngagementConfig,
    t: f64,
    math: &MathConfig,
) -> Result<ControlCommand> {
    let err = bearing_error(p, p, target)?;
    let branch = align_branch(ps.align_branch, err, eng);
    let v = pursuer_long_speed(ps, params, branch, t)?;
    let rep = repulsion(p, peers, cfg)?;
    let steer = if rep == 0.0 { err } else { wrap_finite(err - rep) };
    let w = -sgn_fin(steer, params.turn_cap(v), math.gamma)?;
    Ok(ControlCommand::new(v, w))
}

/// Short-range evader in the multi-agent setting, reacting to its closest pursuer.
pub fn evader_short_multi(
    e: &AgentState,
    ps: &PhaseState,
    closest: &AgentState,
    params: &AgentParams,
    dist: f64,
    t: f64,
    eng: &EngagementConfig,
) -> Result<ControlCommand> {
    evader_short(e, ps, closest, params, dist, t, eng.turn_rule)
}

/// Short-range pursuer in the multi-agent setting; identical to the single law.
pub fn pursuer_short_multi(
    ps: &PhaseState,
    params: &AgentParams,
    w_target: f64,
    dist: f64,
    t: f64,
) -> Result<ControlCommand> {
    pursuer_short(ps, params, w_target, dist, t)
}

/// Distance over closing speed; when the pursuer is not faster, distance
/// over pursuer top speed.
pub fn predicted_capture_time(
    p: &AgentState,
    e: &AgentState,
    params_p: &AgentParams,
    params_e: &AgentParams,
) -> Result<f64> {
    if !(params_p.v_max > 0.0) {
        return Err(Error::Domain(format!(
            "pursuer {} has non-positive top speed {}",
            p.id, params_p.v_max
        )));
    }
    let d = p.distance_to(e);
    let closing = params_p.v_max - params_e.v_max;
    Ok(if closing > 0.0 { d / closing } else { d / params_p.v_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    #[default]
    ClosestDistance,
    ShortestPredictedTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostCaptureBehavior {
    Stop,
    #[default]
    Retarget,
}

/// Who chases whom, plus the capture tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingState {
    pub target_of: BTreeMap<usize, usize>,
    pub last_detection_time: Option<f64>,
    /// Detection interval; `None` means targets are only chosen once (or
    /// when the current target is captured).
    pub delta_t_bar: Option<f64>,
    /// Switch threshold: a candidate replaces the current target when its
    /// metric is below `pt` times the current one.
    pub pt: f64,
    pub captured: BTreeSet<usize>,
    pub n_targets: usize,
    pub n_captured: usize,
    pub selection_rule: SelectionRule,
    pub post_capture_behavior: PostCaptureBehavior,
}

impl TargetingState {
    pub fn new(
        n_targets: usize,
        delta_t_bar: Option<f64>,
        pt: f64,
        selection_rule: SelectionRule,
        post_capture_behavior: PostCaptureBehavior,
    ) -> Self {
        Self {
            target_of: BTreeMap::new(),
            last_detection_time: None,
            delta_t_bar,
            pt,
            captured: BTreeSet::new(),
            n_targets,
            n_captured: 0,
            selection_rule,
            post_capture_behavior,
        }
    }

    pub fn all_targets_captured(&self) -> bool {
        self.n_captured >= self.n_targets
    }

    pub fn record_capture(&mut self, evader: usize) {
        if self.captured.insert(evader) {
            self.n_captured += 1;
        }
    }

    fn detection_due(&self, now: f64) -> bool {
        match (self.last_detection_time, self.delta_t_bar) {
            (None, _) => true,
            (Some(_), None) => false,
            // step times are k * dt, so allow for rounding at the boundary
            (Some(last), Some(dt_bar)) => now - last >= dt_bar - 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSwitch {
    pub pursuer: usize,
    pub from: Option<usize>,
    pub to: usize,
}

fn rule_metric(rule: SelectionRule, p: &(AgentState, AgentParams), e: &(AgentState, AgentParams)) -> Result<f64> {
    match rule {
        SelectionRule::ClosestDistance => Ok(p.0.distance_to(&e.0)),
        SelectionRule::ShortestPredictedTime => predicted_capture_time(&p.0, &e.0, &p.1, &e.1),
    }
}

/// Target detection pass.
///
/// Pursuers whose target is missing or captured always take the
/// rule-optimal evader. On a due detection pass every other pursuer switches
/// to the rule-optimal evader when its metric is below `pt` times that of
/// the current target. Ties go to the lowest evader id; pursuers listed in
/// `stopped` are left alone. With every evader captured all assignments are
/// dropped.
pub fn select_targets(
    pursuers: &[(AgentState, AgentParams)],
    evaders: &[(AgentState, AgentParams)],
    ts: &TargetingState,
    now: f64,
    stopped: &BTreeSet<usize>,
) -> Result<(TargetingState, Vec<TargetSwitch>)> {
    if let Some(last) = ts.last_detection_time {
        if now < last {
            return Err(Error::TimeRegression { from: last, to: now });
        }
    }
    let mut next = ts.clone();
    let mut switches = Vec::new();
    let mut alive: Vec<&(AgentState, AgentParams)> =
        evaders.iter().filter(|e| !ts.captured.contains(&e.0.id)).collect();
    alive.sort_by_key(|e| e.0.id);
    if alive.is_empty() {
        next.target_of.clear();
        return Ok((next, switches));
    }
    let due = ts.detection_due(now);

    for p in pursuers {
        let pid = p.0.id;
        if stopped.contains(&pid) {
            next.target_of.remove(&pid);
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for e in &alive {
            let m = rule_metric(ts.selection_rule, p, e)?;
            if best.is_none_or(|(_, bm)| m < bm) {
                best = Some((e.0.id, m));
            }
        }
        let (best_id, best_metric) = best.expect("alive is non-empty");
        let current = ts.target_of.get(&pid).copied();
        let current_alive = current.and_then(|c| alive.iter().find(|e| e.0.id == c));
        let chosen = match current_alive {
            None => Some(best_id),
            Some(cur) if due && best_id != cur.0.id => {
                let cur_metric = rule_metric(ts.selection_rule, p, cur)?;
                (best_metric < ts.pt * cur_metric).then_some(best_id)
            }
            Some(_) => None,
        };
        if let Some(to) = chosen {
            next.target_of.insert(pid, to);
            switches.push(TargetSwitch {
                pursuer: pid,
                from: current,
                to,
            });
        }
    }
    if due {
        next.last_detection_time = Some(now);
    }
    Ok((next, switches))
}
