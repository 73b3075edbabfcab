//! Parameter sweeps and run statistics: capture rates, lowest escaping alert
//! distance, formation dispersion and capture time against pursuer count.

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentParams, AgentState, Role};
use crate::engine::{run_summary, AgentSpec, Scenario, SimTrace};
use crate::error::{Error, Result};
use crate::math::{rel_angle, wrap_finite, Position};

/// Environment variable capping the number of sweep workers.
pub const THREADS_ENV: &str = "PURSUIT_SIM_THREADS";

/// Sets one scalar inside a scenario, addressed by a dotted path.
///
/// `evader.*` and `pursuer.*` write the named parameter (`v_max`, `w_max`,
/// `r`, `a`, `c`, `k`) of every agent with that role. `init.d0` moves the
/// evaders along the current bearing from the first pursuer; `init.theta0`
/// sets every evader heading to `theta_p - theta0`.
pub fn apply_param(scenario: &mut Scenario, path: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Config(format!("{path}: value must be finite, got {value}")));
    }
    let (head, field) = path
        .split_once('.')
        .ok_or_else(|| Error::Config(format!("unknown parameter path `{path}`")))?;
    match head {
        "engagement" => {
            let e = &mut scenario.engagement;
            match field {
                "eps1" => e.eps1 = value,
                "eps2" => e.eps2 = value,
                "bar_theta" => e.bar_theta = value,
                "align_hysteresis" => e.align_hysteresis = value,
                _ => return Err(unknown(path)),
            }
        }
        "evader" | "pursuer" => {
            let role = if head == "evader" { Role::Evader } else { Role::Pursuer };
            for agent in scenario.agents.iter_mut().filter(|a| a.initial.role == role) {
                let p = &mut agent.params;
                match field {
                    "v_max" => p.v_max = value,
                    "w_max" => p.w_max = value,
                    "r" => p.r = value,
                    "a" => p.a = value,
                    "c" => p.c = value,
                    "k" => p.k = value,
                    _ => return Err(unknown(path)),
                }
            }
        }
        "init" => {
            let pursuer = scenario
                .agents
                .iter()
                .find(|a| a.initial.role == Role::Pursuer)
                .map(|a| a.initial)
                .ok_or_else(|| Error::Config("scenario has no pursuer".into()))?;
            for agent in scenario.agents.iter_mut().filter(|a| a.initial.role == Role::Evader) {
                let e = &mut agent.initial;
                match field {
                    "d0" => {
                        let bearing = rel_angle(pursuer.position(), e.position())?;
                        e.x = pursuer.x + value * bearing.cos();
                        e.y = pursuer.y + value * bearing.sin();
                    }
                    "theta0" => e.theta = wrap_finite(pursuer.theta - value),
                    _ => return Err(unknown(path)),
                }
            }
        }
        "multi" => {
            let m = &mut scenario.multi;
            match field {
                "alpha" => m.alpha = value,
                "k_beta" => m.k_beta = value,
                "m_rep" => m.m_rep = value,
                "d_safe" => m.d_safe = value,
                _ => return Err(unknown(path)),
            }
        }
        "targeting" => match field {
            "delta_t_bar" => scenario.targeting.delta_t_bar = Some(value),
            "pt" => scenario.targeting.pt = value,
            _ => return Err(unknown(path)),
        },
        "integration" => match field {
            "dt" => scenario.dt = value,
            "t_f" => scenario.t_f = value,
            _ => return Err(unknown(path)),
        },
        _ => return Err(unknown(path)),
    }
    Ok(())
}

/// Reads the scalar addressed by `path`; role paths read the first agent of
/// that role and `init.*` the first evader relative to the first pursuer.
pub fn param_value(scenario: &Scenario, path: &str) -> Result<f64> {
    let (head, field) = path.split_once('.').ok_or_else(|| unknown(path))?;
    let first = |role: Role| {
        scenario
            .agents
            .iter()
            .find(|a| a.initial.role == role)
            .ok_or_else(|| Error::Config(format!("scenario has no {}", role.as_str())))
    };
    Ok(match (head, field) {
        ("engagement", "eps1") => scenario.engagement.eps1,
        ("engagement", "eps2") => scenario.engagement.eps2,
        ("engagement", "bar_theta") => scenario.engagement.bar_theta,
        ("engagement", "align_hysteresis") => scenario.engagement.align_hysteresis,
        ("evader" | "pursuer", _) => {
            let p = first(if head == "evader" { Role::Evader } else { Role::Pursuer })?.params;
            match field {
                "v_max" => p.v_max,
                "w_max" => p.w_max,
                "r" => p.r,
                "a" => p.a,
                "c" => p.c,
                "k" => p.k,
                _ => return Err(unknown(path)),
            }
        }
        ("init", "d0") => first(Role::Pursuer)?.initial.distance_to(&first(Role::Evader)?.initial),
        ("init", "theta0") => wrap_finite(first(Role::Pursuer)?.initial.theta - first(Role::Evader)?.initial.theta),
        ("multi", "alpha") => scenario.multi.alpha,
        ("multi", "k_beta") => scenario.multi.k_beta,
        ("multi", "m_rep") => scenario.multi.m_rep,
        ("multi", "d_safe") => scenario.multi.d_safe,
        ("targeting", "delta_t_bar") => scenario.targeting.delta_t_bar.unwrap_or(f64::INFINITY),
        ("targeting", "pt") => scenario.targeting.pt,
        ("integration", "dt") => scenario.dt,
        ("integration", "t_f") => scenario.t_f,
        _ => return Err(unknown(path)),
    })
}

fn unknown(path: &str) -> Error {
    Error::Config(format!("unknown parameter path `{path}`"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// One or two axes; cells are laid out row-major with the last axis fastest.
    pub axes: Vec<SweepAxis>,
    pub base: Scenario,
    /// Applied to every cell before the axis values.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Config(format!(
                "sweep needs one or two axes, got {}",
                self.axes.len()
            )));
        }
        for axis in &self.axes {
            let mut sorted = axis.values.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("sweep axis `{}` repeats a value", axis.path)));
            }
            if axis.values.is_empty() || axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "sweep axis `{}` needs a nonempty list of finite values",
                    axis.path
                )));
            }
            // resolve the path once on a scratch copy
            apply_param(&mut self.base.clone(), &axis.path, axis.values[0])?;
        }
        for (path, v) in &self.overrides {
            apply_param(&mut self.base.clone(), path, *v)?;
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis values of cell `i`.
    pub fn cell_values(&self, i: usize) -> Vec<f64> {
        let mut rem = i;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis.values[rem % axis.values.len()];
            rem /= axis.values.len();
        }
        out
    }

    pub fn cell_scenario(&self, i: usize) -> Result<Scenario> {
        let mut sc = self.base.clone();
        for (path, v) in &self.overrides {
            apply_param(&mut sc, path, *v)?;
        }
        for (axis, v) in self.axes.iter().zip(self.cell_values(i)) {
            apply_param(&mut sc, &axis.path, v)?;
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub min_distance: f64,
    pub captured: bool,
    pub t_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub values: Vec<f64>,
    pub outcome: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

/// Builds a worker pool honouring [`THREADS_ENV`].
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        if n == 0 {
            return Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got 0"
            )));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start sweep workers: {e}")))
}

fn cell_result(trace: &SimTrace) -> CellResult {
    CellResult {
        min_distance: trace.summary.min_distance_overall(),
        captured: trace.summary.full_capture,
        t_d: trace.summary.full_capture_time,
    }
}

/// Runs every cell of the grid. Cell failures are recorded, not raised.
pub fn run_sweep(grid: &SweepGrid) -> Result<SweepResult> {
    grid.validate()?;
    let pool = worker_pool()?;
    let cells = pool.install(|| {
        (0..grid.n_cells())
            .into_par_iter()
            .map(|i| {
                let outcome = grid
                    .cell_scenario(i)
                    .and_then(|sc| run_summary(&sc))
                    .map(|tr| cell_result(&tr))
                    .map_err(|e| e.to_string());
                SweepCell {
                    values: grid.cell_values(i),
                    outcome,
                }
            })
            .collect::<Vec<_>>()
    });
    let result = SweepResult {
        axes: grid.axes.clone(),
        cells,
    };
    let failed = result.n_failed();
    if failed > 0 {
        warn!("{failed} of {} sweep cells failed", result.cells.len());
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureRate {
    pub rate: f64,
    pub captured: usize,
    pub counted: usize,
    pub failed: usize,
}

/// Fraction of successful cells that ended in capture.
pub fn capture_rate(result: &SweepResult) -> Result<CaptureRate> {
    let ok: Vec<&CellResult> = result.cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
    let failed = result.cells.len() - ok.len();
    if failed > 0 {
        warn!("capture rate ignores {failed} failed cells");
    }
    if ok.is_empty() {
        return Err(Error::Domain("capture rate of a sweep without successful cells".into()));
    }
    let captured = ok.iter().filter(|c| c.captured).count();
    Ok(CaptureRate {
        rate: captured as f64 / ok.len() as f64,
        captured,
        counted: ok.len(),
        failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRate {
    pub eps1: f64,
    pub rate: CaptureRate,
}

/// Capture rate of the same grid at each alert distance of `ladder`.
pub fn eps1_ladder_rates(grid: &SweepGrid, ladder: &[f64]) -> Result<Vec<LadderRate>> {
    if ladder.is_empty() {
        return Err(Error::Config("eps1 ladder is empty".into()));
    }
    if grid.axes.iter().any(|a| a.path == "engagement.eps1") {
        return Err(Error::Config(
            "eps1 ladder conflicts with a sweep axis over engagement.eps1".into(),
        ));
    }
    ladder
        .iter()
        .map(|&eps1| {
            let mut g = grid.clone();
            g.overrides.insert("engagement.eps1".into(), eps1);
            let rate = capture_rate(&run_sweep(&g)?)?;
            Ok(LadderRate { eps1, rate })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaDispersion {
    pub alpha: f64,
    pub dispersion: f64,
}

/// Dispersion degree of `base` rerun at each selfish parameter value.
pub fn dispersion_over_alpha(base: &Scenario, alphas: &[f64]) -> Result<Vec<AlphaDispersion>> {
    let pool = worker_pool()?;
    pool.install(|| {
        alphas
            .par_iter()
            .map(|&alpha| {
                let mut sc = base.clone();
                apply_param(&mut sc, "multi.alpha", alpha)?;
                sc.validate()?;
                let dispersion = dispersion_degree(&crate::engine::run(&sc)?)?;
                Ok(AlphaDispersion { alpha, dispersion })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowestAlert {
    /// Mean of the per-distance minima over distances that escape at all.
    pub mean: Option<f64>,
    /// Smallest escaping alert distance for each initial distance.
    pub per_d0: Vec<(f64, Option<f64>)>,
    /// Initial distances where no grid value escapes.
    pub unescaped: Vec<f64>,
}

/// For each initial distance, the smallest alert distance on the grid whose
/// run escapes; averaged over the distances that escape at all.
pub fn lowest_alert_distance(eps1_grid: &[f64], d0_set: &[f64], base: &Scenario) -> Result<LowestAlert> {
    if eps1_grid.is_empty() || d0_set.is_empty() {
        return Err(Error::Domain(
            "lowest alert distance needs nonempty eps1 and d0 grids".into(),
        ));
    }
    if eps1_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("eps1 grid must be strictly ascending".into()));
    }
    let pool = worker_pool()?;
    let per_d0: Vec<(f64, Option<f64>)> = pool.install(|| {
        d0_set
            .par_iter()
            .map(|&d0| {
                let found = eps1_grid.iter().copied().find(|&eps1| {
                    let mut sc = base.clone();
                    let outcome = apply_param(&mut sc, "init.d0", d0)
                        .and_then(|_| apply_param(&mut sc, "engagement.eps1", eps1))
                        .and_then(|_| run_summary(&sc));
                    match outcome {
                        Ok(tr) => !tr.summary.full_capture,
                        Err(e) => {
                            warn!("d0={d0} eps1={eps1}: {e}");
                            false
                        }
                    }
                });
                (d0, found)
            })
            .collect()
    });
    let escaped: Vec<f64> = per_d0.iter().filter_map(|p| p.1).collect();
    let unescaped = per_d0.iter().filter(|p| p.1.is_none()).map(|p| p.0).collect();
    let mean = (!escaped.is_empty()).then(|| escaped.iter().sum::<f64>() / escaped.len() as f64);
    Ok(LowestAlert {
        mean,
        per_d0,
        unescaped,
    })
}

fn evader_spread(points: &[Position]) -> f64 {
    let c = Position::centroid(points.iter().copied()).expect("nonempty");
    points.iter().map(|p| p.distance(c)).sum()
}

/// Relative change of the summed evader distances to their centroid between
/// the first and last recorded instants.
pub fn dispersion_degree(trace: &SimTrace) -> Result<f64> {
    let snaps = trace.snapshots();
    let (Some(first), Some(last)) = (snaps.first(), snaps.last()) else {
        return Err(Error::Domain("dispersion of an empty trace".into()));
    };
    let evaders = |snap: &[crate::engine::StepRecord]| -> Vec<Position> {
        snap.iter()
            .filter(|r| r.role == Role::Evader)
            .map(|r| Position::new(r.x, r.y))
            .collect()
    };
    let (p0, p1) = (evaders(first), evaders(last));
    if p0.len() < 2 {
        return Err(Error::Domain(format!(
            "dispersion needs at least two evaders, got {}",
            p0.len()
        )));
    }
    let s0 = evader_spread(&p0);
    if s0 == 0.0 {
        return Err(Error::DegenerateGeometry("all evaders start at the same point".into()));
    }
    Ok((evader_spread(&p1) - s0) / s0)
}

/// Axis-aligned box for random placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl PlacementBox {
    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        (rng.gen_range(self.x.0..=self.x.1), rng.gen_range(self.y.0..=self.y.1))
    }
}

/// Random initial layout: evaders and pursuers drawn uniformly in their
/// boxes, headings `heading ± heading_jitter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub evaders: PlacementBox,
    pub pursuers: PlacementBox,
    pub heading: f64,
    pub heading_jitter: f64,
}

impl Placement {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("evaders", self.evaders), ("pursuers", self.pursuers)] {
            let ok = [b.x.0, b.x.1, b.y.0, b.y.1].iter().all(|v| v.is_finite()) && b.x.0 <= b.x.1 && b.y.0 <= b.y.1;
            if !ok {
                return Err(Error::Config(format!(
                    "placement.{name} box must be finite with min <= max"
                )));
            }
        }
        if !(self.heading_jitter >= 0.0 && self.heading.is_finite()) {
            return Err(Error::Config(
                "placement heading must be finite with jitter >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Scenario with `n_evaders` evaders (ids first) and `n_pursuers` pursuers
/// placed from `seed`. Pursuer draws follow all evader draws, so the pursuers
/// of a smaller team are a prefix of a larger one with the same seed.
pub fn placed_scenario(
    base: &Scenario,
    placement: &Placement,
    n_evaders: usize,
    n_pursuers: usize,
    max_pursuers: usize,
    seed: u64,
) -> Result<Scenario> {
    let template = |role: Role| {
        base.agents
            .iter()
            .find(|a| a.initial.role == role)
            .map(|a| a.params)
            .ok_or_else(|| Error::Config(format!("base scenario has no {}", role.as_str())))
    };
    let (pe, pp): (AgentParams, AgentParams) = (template(Role::Evader)?, template(Role::Pursuer)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heading = |rng: &mut ChaCha8Rng| {
        if placement.heading_jitter > 0.0 {
            placement.heading + rng.gen_range(-placement.heading_jitter..=placement.heading_jitter)
        } else {
            placement.heading
        }
    };
    let mut agents = Vec::new();
    for id in 0..n_evaders {
        let (x, y) = placement.evaders.sample(&mut rng);
        let th = heading(&mut rng);
        agents.push(AgentSpec {
            params: pe,
            initial: AgentState::new(id, Role::Evader, x, y, th),
        });
    }
    for k in 0..max_pursuers.max(n_pursuers) {
        let (x, y) = placement.pursuers.sample(&mut rng);
        let th = heading(&mut rng);
        if k < n_pursuers {
            let id = agents.len();
            agents.push(AgentSpec {
                params: pp,
                initial: AgentState::new(id, Role::Pursuer, x, y, th),
            });
        }
    }
    let mut sc = base.clone();
    sc.agents = agents;
    sc.seed = seed;
    if sc.targeting.n_targets.is_some_and(|n| n > n_evaders) {
        sc.targeting.n_targets = Some(n_evaders);
    }
    sc.validate()?;
    Ok(sc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureTimeRow {
    pub n_pursuers: usize,
    /// Full-capture time per seed, `t_f` when the targets were not all caught.
    pub t_d: Vec<f64>,
    pub captured: Vec<bool>,
    /// Mean over seeds that captured every target.
    pub mean_t_d: Option<f64>,
    pub n_not_captured: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureTimeTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<CaptureTimeRow>,
    /// Rank correlation of mean capture time against team size.
    pub spearman: Option<f64>,
}

/// Full-capture time for each pursuer count over `n_seeds` seeded layouts
/// (seeds `base.seed, base.seed + 1, ...`).
pub fn capture_time_study(
    n_p_range: &[usize],
    n_seeds: usize,
    base: &Scenario,
    placement: &Placement,
) -> Result<CaptureTimeTable> {
    if n_p_range.is_empty() || n_p_range.contains(&0) {
        return Err(Error::Config("pursuer counts must be >= 1".into()));
    }
    if n_seeds == 0 {
        return Err(Error::Config("capture time study needs at least one seed".into()));
    }
    placement.validate()?;
    let n_evaders = base.evader_ids().len();
    let max_p = *n_p_range.iter().max().expect("nonempty");
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| base.seed.wrapping_add(k)).collect();
    let jobs: Vec<(usize, u64)> = n_p_range
        .iter()
        .flat_map(|&np| seeds.iter().map(move |&s| (np, s)))
        .collect();
    let pool = worker_pool()?;
    let results: Vec<Result<(f64, bool)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(np, seed)| {
                let sc = placed_scenario(base, placement, n_evaders, np, max_p, seed)?;
                let tr = run_summary(&sc)?;
                Ok((tr.summary.full_capture_time, tr.summary.full_capture))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (k, &np) in n_p_range.iter().enumerate() {
        let chunk = &results[k * n_seeds..(k + 1) * n_seeds];
        let mut t_d = Vec::with_capacity(n_seeds);
        let mut captured = Vec::with_capacity(n_seeds);
        for r in chunk {
            let (t, c) = r.as_ref().map_err(|e| Error::Config(e.to_string()))?;
            t_d.push(*t);
            captured.push(*c);
        }
        let caught: Vec<f64> = t_d.iter().zip(&captured).filter(|p| *p.1).map(|p| *p.0).collect();
        let mean_t_d = (!caught.is_empty()).then(|| caught.iter().sum::<f64>() / caught.len() as f64);
        rows.push(CaptureTimeRow {
            n_pursuers: np,
            n_not_captured: n_seeds - caught.len(),
            t_d,
            captured,
            mean_t_d,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.mean_t_d.map(|m| (r.n_pursuers as f64, m)))
        .unzip();
    let spearman = spearman(&xs, &ys);
    Ok(CaptureTimeTable { seeds, rows, spearman })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties; `None` for fewer
/// than two points or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Integrator};
    use crate::single::EngagementConfig;
    use approx::assert_abs_diff_eq;

    fn fig_params() -> (AgentParams, AgentParams) {
        (
            AgentParams {
                v_max: 1.2,
                w_max: 1.0,
                r: 0.1,
                a: 0.6,
                c: 0.3,
                k: 5.0,
            },
            AgentParams {
                v_max: 0.6,
                w_max: 2.0,
                r: 0.2,
                a: 0.3,
                c: 0.1,
                k: 5.0,
            },
        )
    }

    fn base(d0: f64, t_f: f64) -> Scenario {
        let (pp, pe) = fig_params();
        let mut sc = Scenario::single(
            pp,
            (0.0, 0.0, 0.0),
            pe,
            (d0, 0.0, 0.0),
            EngagementConfig::default(),
            t_f,
        );
        sc.dt = 0.01;
        sc
    }

    fn cells(flags: &[bool]) -> SweepResult {
        SweepResult {
            axes: vec![SweepAxis {
                path: "init.d0".into(),
                values: (0..flags.len()).map(|i| i as f64).collect(),
            }],
            cells: flags
                .iter()
                .enumerate()
                .map(|(i, &c)| SweepCell {
                    values: vec![i as f64],
                    outcome: Ok(CellResult {
                        min_distance: if c { 0.01 } else { 1.0 },
                        captured: c,
                        t_d: 1.0,
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn rate_counts() {
        assert_eq!(capture_rate(&cells(&[true; 4])).unwrap().rate, 1.0);
        assert_eq!(capture_rate(&cells(&[false; 4])).unwrap().rate, 0.0);
        let mut twelve = vec![true; 6];
        twelve.extend([false; 6]);
        assert_eq!(capture_rate(&cells(&twelve)).unwrap().rate, 0.5);
    }

    #[test]
    fn rate_skips_failed_cells() {
        let mut r = cells(&[true, false, true]);
        r.cells.push(SweepCell {
            values: vec![9.0],
            outcome: Err("boom".into()),
        });
        let rate = capture_rate(&r).unwrap();
        assert_eq!((rate.captured, rate.counted, rate.failed), (2, 3, 1));
    }

    #[test]
    fn ladder_matches_single_sweeps() {
        let grid = SweepGrid {
            axes: vec![SweepAxis {
                path: "init.d0".into(),
                values: vec![2.0, 4.0],
            }],
            base: base(3.0, 20.0),
            overrides: BTreeMap::new(),
        };
        let rates = eps1_ladder_rates(&grid, &[0.2, 1.4]).unwrap();
        for lr in &rates {
            let mut g = grid.clone();
            g.base.engagement.eps1 = lr.eps1;
            assert_eq!(lr.rate, capture_rate(&run_sweep(&g).unwrap()).unwrap());
        }
        let mut clash = grid.clone();
        clash.axes[0].path = "engagement.eps1".into();
        assert!(eps1_ladder_rates(&clash, &[1.0]).is_err());
        assert!(eps1_ladder_rates(&grid, &[]).is_err());
    }

    #[test]
    fn dispersion_over_alpha_rejects_bad_alpha() {
        let (_, pe) = fig_params();
        let mut sc = base(3.0, 1.0);
        sc.mode = crate::engine::Mode::Multi;
        sc.agents.push(AgentSpec {
            params: pe,
            initial: AgentState::new(2, Role::Evader, 3.0, 1.0, 0.0),
        });
        let out = dispersion_over_alpha(&sc, &[0.0, 1.0]).unwrap();
        assert_eq!(out.iter().map(|d| d.alpha).collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert!(dispersion_over_alpha(&sc, &[1.5]).is_err());
    }

    #[test]
    fn param_paths() {
        let mut sc = base(3.0, 1.0);
        apply_param(&mut sc, "evader.r", 0.3).unwrap();
        apply_param(&mut sc, "init.d0", 5.0).unwrap();
        apply_param(&mut sc, "init.theta0", 0.5).unwrap();
        assert_eq!(sc.agents[1].params.r, 0.3);
        assert_abs_diff_eq!(sc.agents[1].initial.x, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.agents[1].initial.theta, -0.5, epsilon = 1e-12);
        assert!(apply_param(&mut sc, "evader.mass", 1.0).is_err());
        assert!(apply_param(&mut sc, "nowhere", 1.0).is_err());
    }

    #[test]
    fn cell_layout_is_row_major() {
        let grid = SweepGrid {
            axes: vec![
                SweepAxis {
                    path: "evader.r".into(),
                    values: vec![0.1, 0.2],
                },
                SweepAxis {
                    path: "pursuer.r".into(),
                    values: vec![1.0, 2.0, 3.0],
                },
            ],
            base: base(3.0, 1.0),
            overrides: BTreeMap::new(),
        };
        assert_eq!(grid.n_cells(), 6);
        assert_eq!(grid.cell_values(0), vec![0.1, 1.0]);
        assert_eq!(grid.cell_values(4), vec![0.2, 2.0]);
    }

    #[test]
    fn sweep_single_cell_and_rerun() {
        let grid = SweepGrid {
            axes: vec![
                SweepAxis {
                    path: "evader.a".into(),
                    values: vec![0.2, 0.4],
                },
                SweepAxis {
                    path: "init.d0".into(),
                    values: vec![2.0, 4.0],
                },
            ],
            base: base(3.0, 8.0),
            overrides: BTreeMap::new(),
        };
        let a = run_sweep(&grid).unwrap();
        assert_eq!(a, run_sweep(&grid).unwrap());
        let one = SweepGrid {
            axes: vec![SweepAxis {
                path: "evader.a".into(),
                values: vec![0.2],
            }],
            ..grid
        };
        let r = run_sweep(&one).unwrap();
        let direct = run_summary(&one.cell_scenario(0).unwrap()).unwrap();
        assert_eq!(
            r.cells[0].outcome.as_ref().unwrap().min_distance,
            direct.summary.min_distance_overall()
        );
    }

    #[test]
    fn sweep_records_bad_cells() {
        let grid = SweepGrid {
            axes: vec![SweepAxis {
                path: "engagement.eps2".into(),
                values: vec![0.04, 2.0],
            }],
            base: base(3.0, 2.0),
            overrides: BTreeMap::new(),
        };
        let r = run_sweep(&grid).unwrap();
        assert!(r.cells[0].outcome.is_ok());
        assert!(r.cells[1].outcome.as_ref().unwrap_err().contains("eps2"));
    }

    #[test]
    fn captured_matches_min_distance() {
        let grid = SweepGrid {
            axes: vec![SweepAxis {
                path: "init.theta0".into(),
                values: vec![0.0, 1.0, 2.0, 3.0],
            }],
            base: base(2.0, 10.0),
            overrides: BTreeMap::new(),
        };
        for c in run_sweep(&grid).unwrap().cells {
            let c = c.outcome.unwrap();
            assert_eq!(c.captured, c.min_distance <= 0.04);
        }
    }

    #[test]
    fn lowest_alert_boundaries() {
        assert!(lowest_alert_distance(&[], &[1.0], &base(3.0, 1.0)).is_err());
        assert!(lowest_alert_distance(&[2.0, 1.0], &[1.0], &base(3.0, 1.0)).is_err());
        // far apart and short horizon: everything escapes
        let r = lowest_alert_distance(&[0.5, 1.0, 1.5], &[8.0, 9.0], &base(8.0, 2.0)).unwrap();
        assert_eq!(r.mean, Some(0.5));
        assert!(r.unescaped.is_empty());
    }

    #[test]
    fn lowest_alert_largest_only() {
        // an evader that can barely move: with the larger alert distance the
        // pursuer's mirrored turn carries it past
        let (pp, mut pe) = fig_params();
        pe.v_max = 1e-9;
        pe.a = 0.0;
        let mut sc = Scenario::single(
            pp,
            (0.0, 0.0, 0.0),
            pe,
            (3.0, 0.0, 0.0),
            EngagementConfig::default(),
            10.0,
        );
        sc.dt = 0.01;
        let r = lowest_alert_distance(&[0.5, 1.0], &[3.0], &sc).unwrap();
        assert_eq!(r.mean, Some(1.0));
        let r = lowest_alert_distance(&[0.5], &[3.0], &sc).unwrap();
        assert_eq!(r.mean, None);
        assert_eq!(r.unescaped, vec![3.0]);
    }

    fn multi_trace(points: &[(f64, f64)], later: &[(f64, f64)]) -> SimTrace {
        let mut records = Vec::new();
        for (t, pts) in [(0.0, points), (1.0, later)] {
            for (i, &(x, y)) in pts.iter().enumerate() {
                records.push(crate::engine::StepRecord {
                    t,
                    agent_id: i,
                    role: Role::Evader,
                    x,
                    y,
                    theta: 0.0,
                    v: 0.0,
                    w: 0.0,
                    phase: crate::agents::Phase::Long,
                    target_id: None,
                });
            }
        }
        SimTrace {
            dt: 1.0,
            eps2: 0.1,
            records,
            events: vec![],
            summary: run_summary(&base(3.0, 0.1)).unwrap().summary,
        }
    }

    #[test]
    fn dispersion_examples() {
        let p = [(0.0, 0.0), (2.0, 0.0), (1.0, 3.0)];
        let shifted: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (x + 5.0, y - 1.0)).collect();
        assert_abs_diff_eq!(
            dispersion_degree(&multi_trace(&p, &shifted)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let doubled: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (2.0 * x - 1.0, 2.0 * y - 1.0)).collect();
        assert_abs_diff_eq!(
            dispersion_degree(&multi_trace(&p, &doubled)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(dispersion_degree(&multi_trace(&[(1.0, 1.0), (1.0, 1.0)], &[(0.0, 0.0), (1.0, 0.0)])).is_err());
        assert!(dispersion_degree(&multi_trace(&[(1.0, 1.0)], &[(0.0, 0.0)])).is_err());
    }

    #[test]
    fn spearman_values() {
        assert_abs_diff_eq!(
            spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // ties: ranks (1.5, 1.5, 3) vs (1, 2, 3)
        assert_abs_diff_eq!(
            spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.866025403784,
            epsilon = 1e-9
        );
        assert!(spearman(&[1.0], &[1.0]).is_none());
        assert!(spearman(&[1.0, 2.0], &[5.0, 5.0]).is_none());
    }

    fn study_base() -> (Scenario, Placement) {
        let (pp, pe) = fig_params();
        let mut sc = Scenario::single(
            pp,
            (0.0, 0.0, 0.0),
            pe,
            (3.0, 0.0, 0.0),
            EngagementConfig::default(),
            20.0,
        );
        sc.mode = crate::engine::Mode::Multi;
        sc.dt = 0.01;
        sc.integrator = Integrator::Euler;
        let placement = Placement {
            evaders: PlacementBox {
                x: (2.0, 4.0),
                y: (-1.0, 1.0),
            },
            pursuers: PlacementBox {
                x: (-2.0, 0.0),
                y: (-1.0, 1.0),
            },
            heading: 0.0,
            heading_jitter: 0.3,
        };
        (sc, placement)
    }

    #[test]
    fn placement_prefix_and_determinism() {
        let (sc, pl) = study_base();
        let a = placed_scenario(&sc, &pl, 1, 2, 4, 7).unwrap();
        let b = placed_scenario(&sc, &pl, 1, 4, 4, 7).unwrap();
        assert_eq!(a.agents[..], b.agents[..3]);
        assert_eq!(a, placed_scenario(&sc, &pl, 1, 2, 4, 7).unwrap());
    }

    #[test]
    fn capture_time_single_pair_reduction() {
        let (sc, pl) = study_base();
        let table = capture_time_study(&[1], 2, &sc, &pl).unwrap();
        for (k, &seed) in table.seeds.iter().enumerate() {
            let placed = placed_scenario(&sc, &pl, 1, 1, 1, seed).unwrap();
            let mut single = placed.clone();
            single.mode = crate::engine::Mode::SingleVsSingle;
            let t = run(&single).unwrap().summary.full_capture_time;
            assert_eq!(table.rows[0].t_d[k], t);
        }
        assert_eq!(table, capture_time_study(&[1], 2, &sc, &pl).unwrap());
    }
}
