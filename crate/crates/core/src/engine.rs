//! Fixed-step hybrid simulation loop.
//!
//! Each step: target detection (multi-agent), group update, phase
//! classification, command computation from the pre-step snapshot (evaders
//! before pursuers, since a maneuvering pursuer copies its target's turn
//! direction), integration, capture check on post-step positions, record.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::{unicycle_rate, AgentParams, AgentState, ControlCommand, Phase, PhaseState, Role};
use crate::error::{Error, Result};
use crate::math::{wrap_finite, MathConfig};
use crate::multi::{
    aggregation_cmd, beta_weight, blend_isolated, blend_main, classify_groups, escape_cmd, evader_short_multi,
    join_cmd, main_center, pursuer_long_multi, pursuer_short_multi, select_targets, GroupEvent, GroupState,
    MultiConfig, PostCaptureBehavior, SelectionRule, TargetingState,
};
use crate::single::{
    advance_bookkeeping, bearing_error, classify_phase, evader_long, evader_short, pursuer_long, pursuer_short,
    EngagementConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One pursuer against one evader.
    #[default]
    SingleVsSingle,
    /// Any number of pursuers and evaders with group escape and targeting.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub params: AgentParams,
    pub initial: AgentState,
}

/// Target assignment settings for multi-agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetingConfig {
    /// Number of captures that ends the run; `None` means every evader.
    pub n_targets: Option<usize>,
    pub delta_t_bar: Option<f64>,
    pub pt: f64,
    pub selection_rule: SelectionRule,
    pub post_capture_behavior: PostCaptureBehavior,
}

impl Default for TargetingConfig {
    fn default() -> Self {
        Self {
            n_targets: None,
            delta_t_bar: None,
            pt: 0.2,
            selection_rule: SelectionRule::default(),
            post_capture_behavior: PostCaptureBehavior::default(),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Agent `i` must carry id `i`.
    pub agents: Vec<AgentSpec>,
    pub engagement: EngagementConfig,
    pub math: MathConfig,
    pub multi: MultiConfig,
    pub targeting: TargetingConfig,
    pub dt: f64,
    pub t_f: f64,
    pub integrator: Integrator,
    pub seed: u64,
    pub mode: Mode,
}

impl Scenario {
    /// One pursuer (id 0) against one evader (id 1) with default settings.
    pub fn single(
        pursuer: AgentParams,
        pursuer_pose: (f64, f64, f64),
        evader: AgentParams,
        evader_pose: (f64, f64, f64),
        engagement: EngagementConfig,
        t_f: f64,
    ) -> Self {
        let (px, py, pth) = pursuer_pose;
        let (ex, ey, eth) = evader_pose;
        Self {
            name: "single".into(),
            agents: vec![
                AgentSpec {
                    params: pursuer,
                    initial: AgentState::new(0, Role::Pursuer, px, py, pth),
                },
                AgentSpec {
                    params: evader,
                    initial: AgentState::new(1, Role::Evader, ex, ey, eth),
                },
            ],
            engagement,
            math: MathConfig::default(),
            multi: MultiConfig::default(),
            targeting: TargetingConfig::default(),
            dt: 0.005,
            t_f,
            integrator: Integrator::Euler,
            seed: 0,
            mode: Mode::SingleVsSingle,
        }
    }

    pub fn pursuer_ids(&self) -> Vec<usize> {
        self.ids_with(Role::Pursuer)
    }

    pub fn evader_ids(&self) -> Vec<usize> {
        self.ids_with(Role::Evader)
    }

    fn ids_with(&self, role: Role) -> Vec<usize> {
        self.agents
            .iter()
            .filter(|a| a.initial.role == role)
            .map(|a| a.initial.id)
            .collect()
    }

    pub fn n_steps(&self) -> usize {
        (self.t_f / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("integration.dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_f > self.dt && self.t_f.is_finite()) {
            return Err(Error::Config(format!(
                "integration.t_f must exceed dt, got t_f={} dt={}",
                self.t_f, self.dt
            )));
        }
        self.engagement.validate()?;
        self.math.validate()?;
        self.multi.validate()?;
        for (i, a) in self.agents.iter().enumerate() {
            if a.initial.id != i {
                return Err(Error::Config(format!(
                    "agents[{i}] carries id {}, expected {i}",
                    a.initial.id
                )));
            }
            a.params.validate(&format!("agents[{i}]"))?;
            if !a.initial.is_finite() || a.initial.v < 0.0 || a.initial.v > a.params.v_max {
                return Err(Error::Config(format!(
                    "agents[{i}] initial state must be finite with 0 <= v <= v_max"
                )));
            }
        }
        let (np, ne) = (self.pursuer_ids().len(), self.evader_ids().len());
        if np == 0 || ne == 0 {
            return Err(Error::Config(
                "a scenario needs at least one pursuer and one evader".into(),
            ));
        }
        if self.mode == Mode::SingleVsSingle && (np != 1 || ne != 1) {
            return Err(Error::Config(format!(
                "mode single_vs_single needs exactly one pursuer and one evader, got {np} and {ne}"
            )));
        }
        if let Some(n) = self.targeting.n_targets {
            if n == 0 || n > ne {
                return Err(Error::Config(format!(
                    "targeting.n_targets must lie in [1, {ne}], got {n}"
                )));
            }
        }
        if let Some(d) = self.targeting.delta_t_bar {
            if !(d >= 0.0) {
                return Err(Error::Config(format!("targeting.delta_t_bar must be >= 0, got {d}")));
            }
        }
        if !(self.targeting.pt >= 0.0) {
            return Err(Error::Config(format!(
                "targeting.pt must be >= 0, got {}",
                self.targeting.pt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    AlertEntered,
    AlertExited,
    Captured,
    TargetSwitched,
    Isolated,
    Rejoined,
}

/// A discrete event; `agents` lists the evader first for alert and capture
/// events and the pursuer first for target switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub agents: Vec<usize>,
}

/// State of one agent at one recorded instant, with the command it applies
/// from that instant on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub agent_id: usize,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    pub phase: Phase,
    pub target_id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pursuer: usize,
    pub evader: usize,
    pub min_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureSummary {
    pub evader: usize,
    pub captured: bool,
    /// Capture time, or `t_f` when the evader was never caught.
    pub t_d: f64,
    pub by: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub pairs: Vec<PairSummary>,
    pub captures: Vec<CaptureSummary>,
    pub n_targets: usize,
    pub n_captured: usize,
    /// Every target captured before `t_f`.
    pub full_capture: bool,
    /// Time of the capture that completed the target count, `t_f` otherwise.
    pub full_capture_time: f64,
    pub t_end: f64,
    pub t_f: f64,
}

impl RunSummary {
    pub fn min_distance_overall(&self) -> f64 {
        self.pairs.iter().map(|p| p.min_distance).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub dt: f64,
    pub eps2: f64,
    pub records: Vec<StepRecord>,
    pub events: Vec<Event>,
    pub summary: RunSummary,
}

impl SimTrace {
    /// Records of one agent in time order.
    pub fn agent_records(&self, id: usize) -> impl Iterator<Item = &StepRecord> + '_ {
        self.records.iter().filter(move |r| r.agent_id == id)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Record groups, one per recorded instant, in time order.
    pub fn snapshots(&self) -> Vec<&[StepRecord]> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].t != self.records[start].t {
                out.push(&self.records[start..i]);
                start = i;
            }
        }
        out
    }
}

/// Smallest recorded distance between a pursuer and an evader.
pub fn min_distance(trace: &SimTrace, pursuer: usize, evader: usize) -> Result<f64> {
    trace
        .summary
        .pairs
        .iter()
        .find(|p| p.pursuer == pursuer && p.evader == evader)
        .map(|p| p.min_distance)
        .ok_or(Error::UnknownPair { pursuer, evader })
}

/// What happened during one step.
#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    pub commands: Vec<ControlCommand>,
    /// Phase of each agent while the step was applied.
    pub phases: Vec<Phase>,
    pub targets: Vec<Option<usize>>,
    pub events: Vec<Event>,
}

/// Mutable simulation state of one run.
#[derive(Debug, Clone)]
pub struct World {
    pub step_index: usize,
    pub states: Vec<AgentState>,
    pub phases: Vec<PhaseState>,
    pub targeting: TargetingState,
    pub groups: Option<GroupState>,
    pub stopped_pursuers: BTreeSet<usize>,
    pub capture_times: BTreeMap<usize, (f64, usize)>,
    pub last_commands: Vec<ControlCommand>,
    pursuers: Vec<usize>,
    evaders: Vec<usize>,
    ended_short: Vec<usize>,
    last_d_des_refresh: f64,
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let states: Vec<AgentState> = scenario.agents.iter().map(|a| a.initial).collect();
        let phases = states.iter().map(|s| PhaseState::initial(s.v)).collect();
        let evaders = scenario.evader_ids();
        let pursuers = scenario.pursuer_ids();
        let t = &scenario.targeting;
        let targeting = TargetingState::new(
            t.n_targets.unwrap_or(evaders.len()),
            t.delta_t_bar,
            t.pt,
            t.selection_rule,
            t.post_capture_behavior,
        );
        let groups = if scenario.mode == Mode::Multi {
            let ev: Vec<AgentState> = evaders.iter().map(|&i| states[i]).collect();
            Some(GroupState::from_initial(&ev, scenario.multi.iso_threshold)?)
        } else {
            None
        };
        let mut world = Self {
            step_index: 0,
            last_commands: vec![ControlCommand::STOP; states.len()],
            states,
            phases,
            targeting,
            groups,
            stopped_pursuers: BTreeSet::new(),
            capture_times: BTreeMap::new(),
            pursuers,
            evaders,
            ended_short: Vec::new(),
            last_d_des_refresh: 0.0,
        };
        world.check_captures(scenario, 0.0, &mut Vec::new());
        Ok(world)
    }

    pub fn time(&self, scenario: &Scenario) -> f64 {
        self.step_index as f64 * scenario.dt
    }

    pub fn finished(&self) -> bool {
        self.targeting.all_targets_captured()
    }

    fn closest_pursuer(&self, evader: usize) -> (usize, f64) {
        let e = &self.states[evader];
        let mut best = (self.pursuers[0], f64::INFINITY);
        for &p in &self.pursuers {
            let d = self.states[p].distance_to(e);
            if d < best.1 {
                best = (p, d);
            }
        }
        best
    }

    fn check_captures(&mut self, scenario: &Scenario, t: f64, events: &mut Vec<Event>) {
        for idx in 0..self.evaders.len() {
            let e = self.evaders[idx];
            if self.targeting.captured.contains(&e) {
                continue;
            }
            let (p, d) = self.closest_pursuer(e);
            if d <= scenario.engagement.eps2 {
                self.targeting.record_capture(e);
                self.capture_times.insert(e, (t, p));
                self.phases[e].phase = Phase::Stopped;
                events.push(Event {
                    t,
                    kind: EventKind::Captured,
                    agents: vec![e, p],
                });
                if scenario.mode == Mode::SingleVsSingle
                    || self.targeting.post_capture_behavior == PostCaptureBehavior::Stop
                {
                    self.stopped_pursuers.insert(p);
                }
            }
        }
        if self.finished() {
            for ps in &mut self.phases {
                ps.phase = Phase::Stopped;
            }
        }
    }

    /// Advances the world by one step of `scenario.dt`.
    pub fn step(&mut self, scenario: &Scenario) -> Result<StepOutput> {
        let t = self.time(scenario);
        if let Some(bad) = self.states.iter().find(|s| !s.is_finite()) {
            return Err(Error::Integrity {
                t,
                detail: format!("agent {} state is non-finite: {bad:?}", bad.id),
            });
        }
        let mut out = StepOutput::default();
        let commands = if self.finished() {
            vec![ControlCommand::STOP; self.states.len()]
        } else {
            match scenario.mode {
                Mode::SingleVsSingle => self.single_commands(scenario, t, &mut out.events)?,
                Mode::Multi => self.multi_commands(scenario, t, &mut out.events)?,
            }
        };

        out.phases = self.phases.iter().map(|p| p.phase).collect();
        out.targets = (0..self.states.len()).map(|i| self.target_of(i)).collect();
        for (state, cmd) in self.states.iter_mut().zip(&commands) {
            integrate(state, *cmd, scenario.dt, scenario.integrator);
            if !state.is_finite() {
                return Err(Error::Integrity {
                    t,
                    detail: format!("agent {} state became non-finite: {state:?} after {cmd:?}", state.id),
                });
            }
        }
        self.step_index += 1;
        let t_next = self.time(scenario);
        self.check_captures(scenario, t_next, &mut out.events);
        self.last_commands.clone_from(&commands);
        out.commands = commands;
        Ok(out)
    }

    fn single_commands(&mut self, scenario: &Scenario, t: f64, events: &mut Vec<Event>) -> Result<Vec<ControlCommand>> {
        let (pi, ei) = (self.pursuers[0], self.evaders[0]);
        let (p, e) = (self.states[pi], self.states[ei]);
        let (pp, ep) = (&scenario.agents[pi].params, &scenario.agents[ei].params);
        let eng = &scenario.engagement;
        let dist = p.distance_to(&e);
        let phase = classify_phase(dist, eng);
        let prev = self.phases[ei].phase;
        note_alert(prev, phase, t, ei, pi, events);

        let err = if phase == Phase::Long {
            Some(bearing_error(&p, &p, &e)?)
        } else {
            None
        };
        self.phases[ei] = advance_bookkeeping(&self.phases[ei], phase, None, e.v, ep, eng, t)?;
        self.phases[pi] = advance_bookkeeping(&self.phases[pi], phase, err, p.v, pp, eng, t)?;

        let mut cmds = vec![ControlCommand::STOP; self.states.len()];
        match phase {
            Phase::Long => {
                cmds[ei] = evader_long(&e, &self.phases[ei], &p, ep, t, &scenario.math)?;
                cmds[pi] = pursuer_long(&p, &self.phases[pi], &e, pp, eng, t, &scenario.math)?;
            }
            Phase::Short => {
                cmds[ei] = evader_short(&e, &self.phases[ei], &p, ep, dist, t, eng.turn_rule)?;
                cmds[pi] = pursuer_short(&self.phases[pi], pp, cmds[ei].w, dist, t)?;
            }
            Phase::Stopped => {}
        }
        Ok(cmds)
    }

    fn multi_commands(&mut self, scenario: &Scenario, t: f64, events: &mut Vec<Event>) -> Result<Vec<ControlCommand>> {
        let eng = &scenario.engagement;
        let params = |i: usize| &scenario.agents[i].params;

        // (1) target detection
        let pursuer_pairs: Vec<(AgentState, AgentParams)> =
            self.pursuers.iter().map(|&i| (self.states[i], *params(i))).collect();
        let evader_pairs: Vec<(AgentState, AgentParams)> =
            self.evaders.iter().map(|&i| (self.states[i], *params(i))).collect();
        let (targeting, switches) = select_targets(
            &pursuer_pairs,
            &evader_pairs,
            &self.targeting,
            t,
            &self.stopped_pursuers,
        )?;
        self.targeting = targeting;
        for s in switches.iter().filter(|s| s.from.is_some()) {
            events.push(Event {
                t,
                kind: EventKind::TargetSwitched,
                agents: vec![s.pursuer, s.to],
            });
        }

        // (2) groups
        let evader_states: Vec<AgentState> = self.evaders.iter().map(|&i| self.states[i]).collect();
        if let Some(groups) = &self.groups {
            let mut groups = groups.clone();
            if let Some(period) = scenario.multi.d_des_update_period {
                if t - self.last_d_des_refresh >= period - 1e-9 {
                    groups.refresh_d_des(&evader_states);
                    self.last_d_des_refresh = t;
                }
            }
            let ended = std::mem::take(&mut self.ended_short);
            let (next, group_events) = classify_groups(&evader_states, &groups, &self.targeting.captured, &ended);
            for ev in group_events {
                let (kind, id) = match ev {
                    GroupEvent::Isolated(id) => (EventKind::Isolated, id),
                    GroupEvent::Rejoined(id) => (EventKind::Rejoined, id),
                };
                events.push(Event {
                    t,
                    kind,
                    agents: vec![id],
                });
            }
            self.groups = Some(next);
        }

        // (3) phases
        let mut closest = BTreeMap::new();
        for &e in &self.evaders {
            let (p, d) = self.closest_pursuer(e);
            closest.insert(e, (p, d));
            let phase = if self.targeting.captured.contains(&e) {
                Phase::Stopped
            } else {
                classify_phase(d, eng)
            };
            let prev = self.phases[e].phase;
            note_alert(prev, phase, t, e, p, events);
            if prev == Phase::Short && phase == Phase::Long {
                self.ended_short.push(e);
            }
            self.phases[e] = advance_bookkeeping(&self.phases[e], phase, None, self.states[e].v, params(e), eng, t)?;
        }
        for &p in &self.pursuers {
            let target = self.targeting.target_of.get(&p).copied();
            let phase = match target {
                Some(e) if !self.stopped_pursuers.contains(&p) => self.phases[e].phase,
                _ => Phase::Stopped,
            };
            let err = match (phase, target) {
                (Phase::Long, Some(e)) => Some(bearing_error(&self.states[p], &self.states[p], &self.states[e])?),
                _ => None,
            };
            self.phases[p] = advance_bookkeeping(&self.phases[p], phase, err, self.states[p].v, params(p), eng, t)?;
        }

        // (4) commands, evaders first
        let mut cmds = vec![ControlCommand::STOP; self.states.len()];
        let groups = self.groups.as_ref().expect("multi mode keeps group state");
        let lone_evader = self.evaders.len() == 1;
        for &e in &self.evaders {
            let ps = &self.phases[e];
            let (pl, dist) = closest[&e];
            let (es, ep, threat) = (&self.states[e], params(e), &self.states[pl]);
            cmds[e] = match ps.phase {
                Phase::Stopped => ControlCommand::STOP,
                Phase::Short => evader_short_multi(es, ps, threat, ep, dist, t, eng)?,
                Phase::Long if lone_evader => evader_long(es, ps, threat, ep, t, &scenario.math)?,
                Phase::Long if groups.main_members.contains(&e) => {
                    let esc = escape_cmd(es, ps, threat, ep, t)?;
                    if groups.main_members.len() >= 2 {
                        let center =
                            main_center(&self.states, &groups.main_members, None).expect("main group is non-empty");
                        let agg = aggregation_cmd(es, center, groups.d_des(e), threat, ep)?;
                        blend_main(ControlCommand::new(agg.v, agg.w), esc, scenario.multi.alpha, ep)
                    } else {
                        esc.clamped(ep)
                    }
                }
                Phase::Long => {
                    let esc = escape_cmd(es, ps, threat, ep, t)?;
                    match main_center(&self.states, &groups.main_members, None) {
                        Some(center) => {
                            let joi = join_cmd(es, ps, center, ep, t)?;
                            let beta = beta_weight(dist, scenario.multi.k_beta, eng.eps1);
                            blend_isolated(joi, esc, beta, ep)
                        }
                        None => esc.clamped(ep),
                    }
                }
            };
        }
        let pursuer_states: Vec<AgentState> = self.pursuers.iter().map(|&i| self.states[i]).collect();
        for &p in &self.pursuers {
            let ps = &self.phases[p];
            let Some(target) = self.targeting.target_of.get(&p).copied() else {
                continue;
            };
            let (me, pp, tgt) = (&self.states[p], params(p), &self.states[target]);
            cmds[p] = match ps.phase {
                Phase::Stopped => ControlCommand::STOP,
                Phase::Long => pursuer_long_multi(
                    me,
                    ps,
                    tgt,
                    &pursuer_states,
                    pp,
                    &scenario.multi,
                    eng,
                    t,
                    &scenario.math,
                )?,
                Phase::Short => pursuer_short_multi(ps, pp, cmds[target].w, me.distance_to(tgt), t)?,
            };
        }
        Ok(cmds)
    }

    fn target_of(&self, id: usize) -> Option<usize> {
        match self.states[id].role {
            Role::Pursuer => self.targeting.target_of.get(&id).copied().or_else(|| {
                // single mode has a fixed opponent
                (self.evaders.len() == 1 && self.pursuers.len() == 1 && self.groups.is_none()).then(|| self.evaders[0])
            }),
            Role::Evader => None,
        }
    }
}

fn note_alert(prev: Phase, next: Phase, t: f64, evader: usize, pursuer: usize, events: &mut Vec<Event>) {
    let kind = match (prev, next) {
        (Phase::Long, Phase::Short) => EventKind::AlertEntered,
        (Phase::Short, Phase::Long) => EventKind::AlertExited,
        _ => return,
    };
    events.push(Event {
        t,
        kind,
        agents: vec![evader, pursuer],
    });
}

/// Integrates one agent over `dt` with its command held constant, then
/// stores the commanded speed on the state.
pub fn integrate(state: &mut AgentState, cmd: ControlCommand, dt: f64, integrator: Integrator) {
    match integrator {
        Integrator::Euler => {
            let d = unicycle_rate(state.theta, cmd);
            state.x += d.dx * dt;
            state.y += d.dy * dt;
            state.theta += d.dtheta * dt;
        }
        Integrator::Rk4 => {
            let th = state.theta;
            let k1 = unicycle_rate(th, cmd);
            let k2 = unicycle_rate(th + 0.5 * dt * k1.dtheta, cmd);
            let k3 = unicycle_rate(th + 0.5 * dt * k2.dtheta, cmd);
            let k4 = unicycle_rate(th + dt * k3.dtheta, cmd);
            state.x += dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
            state.y += dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
            state.theta += dt / 6.0 * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
        }
    }
    if state.theta.is_finite() {
        state.theta = wrap_finite(state.theta);
    }
    state.v = cmd.v;
}

struct Tracker {
    pairs: Vec<PairSummary>,
}

impl Tracker {
    fn new(world: &World) -> Self {
        let mut pairs = Vec::new();
        for &p in &world.pursuers {
            for &e in &world.evaders {
                pairs.push(PairSummary {
                    pursuer: p,
                    evader: e,
                    min_distance: f64::INFINITY,
                });
            }
        }
        Self { pairs }
    }

    fn observe(&mut self, world: &World) {
        for pair in &mut self.pairs {
            let d = world.states[pair.pursuer].distance_to(&world.states[pair.evader]);
            if d < pair.min_distance {
                pair.min_distance = d;
            }
        }
    }
}

fn push_records(
    states: &[AgentState],
    t: f64,
    commands: &[ControlCommand],
    phases: &[Phase],
    targets: &[Option<usize>],
    out: &mut Vec<StepRecord>,
) {
    for (i, s) in states.iter().enumerate() {
        out.push(StepRecord {
            t,
            agent_id: s.id,
            role: s.role,
            x: s.x,
            y: s.y,
            theta: s.theta,
            v: commands[i].v,
            w: commands[i].w,
            phase: phases[i],
            target_id: targets[i],
        });
    }
}

fn simulate(scenario: &Scenario, record: bool) -> Result<SimTrace> {
    let mut world = World::new(scenario)?;
    let mut tracker = Tracker::new(&world);
    let mut records = Vec::new();
    let mut events: Vec<Event> = world
        .capture_times
        .iter()
        .map(|(&e, &(t, p))| Event {
            t,
            kind: EventKind::Captured,
            agents: vec![e, p],
        })
        .collect();
    tracker.observe(&world);

    let n_steps = scenario.n_steps();
    while world.step_index < n_steps && !world.finished() {
        let t = world.time(scenario);
        let before = record.then(|| world.states.clone());
        let out = world.step(scenario)?;
        if let Some(states) = before {
            push_records(&states, t, &out.commands, &out.phases, &out.targets, &mut records);
        }
        events.extend(out.events);
        tracker.observe(&world);
    }
    let t_end = world.time(scenario);
    if record {
        let terminal: Vec<ControlCommand> = world
            .phases
            .iter()
            .zip(&world.last_commands)
            .map(|(ps, c)| {
                if ps.phase == Phase::Stopped {
                    ControlCommand::STOP
                } else {
                    *c
                }
            })
            .collect();
        let phases: Vec<Phase> = world.phases.iter().map(|p| p.phase).collect();
        let targets: Vec<Option<usize>> = (0..world.states.len()).map(|i| world.target_of(i)).collect();
        push_records(&world.states, t_end, &terminal, &phases, &targets, &mut records);
    }

    let captures = world
        .evaders
        .iter()
        .map(|&e| match world.capture_times.get(&e) {
            Some(&(t, p)) => CaptureSummary {
                evader: e,
                captured: true,
                t_d: t,
                by: Some(p),
            },
            None => CaptureSummary {
                evader: e,
                captured: false,
                t_d: scenario.t_f,
                by: None,
            },
        })
        .collect();
    let full_capture = world.finished();
    let full_capture_time = if full_capture {
        let mut times: Vec<f64> = world.capture_times.values().map(|v| v.0).collect();
        times.sort_by(f64::total_cmp);
        times[world.targeting.n_targets - 1]
    } else {
        scenario.t_f
    };
    Ok(SimTrace {
        dt: scenario.dt,
        eps2: scenario.engagement.eps2,
        records,
        events,
        summary: RunSummary {
            pairs: tracker.pairs,
            captures,
            n_targets: world.targeting.n_targets,
            n_captured: world.targeting.n_captured,
            full_capture,
            full_capture_time,
            t_end,
            t_f: scenario.t_f,
        },
    })
}

/// Runs until every target is captured or `t_f` is reached, recording every step.
pub fn run(scenario: &Scenario) -> Result<SimTrace> {
    simulate(scenario, true)
}

/// Same run without per-step records.
pub fn run_summary(scenario: &Scenario) -> Result<SimTrace> {
    simulate(scenario, false)
}
