//! Scenario files, CSV/JSON writers and readers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentParams, AgentState, Role};
use crate::analysis::{param_value, CellResult, Placement, SweepAxis, SweepCell, SweepGrid, SweepResult};
use crate::engine::{AgentSpec, Integrator, Mode, Scenario, SimTrace, TargetingConfig};
use crate::error::{Error, Result};
use crate::math::MathConfig;
use crate::multi::{MultiConfig, PostCaptureBehavior, SelectionRule};
use crate::single::{EngagementConfig, TurnRule};
use crate::verify::Theorem1Inputs;

pub const TRACE_HEADER: &str = "t,agent_id,role,x,y,theta,v,w,phase,target_id";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Short label of the experiment this file reproduces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// Where values not taken from the reference setup came from.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
    /// Reference parameter values, checked against the parsed file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reference: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl From<AgentParams> for ParamsFile {
    fn from(p: AgentParams) -> Self {
        Self {
            v_max: Some(p.v_max),
            w_max: Some(p.w_max),
            r: Some(p.r),
            a: Some(p.a),
            c: Some(p.c),
            k: Some(p.k),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesFile {
    #[serde(default)]
    pub pursuer: ParamsFile,
    #[serde(default)]
    pub evader: ParamsFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Overrides of the role defaults for this agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsFile>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngagementFile {
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub bar_theta: Option<f64>,
    pub align_hysteresis: Option<f64>,
    pub turn_rule: Option<TurnRule>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiFile {
    pub alpha: Option<f64>,
    pub k_beta: Option<f64>,
    pub m_rep: Option<f64>,
    pub d_safe: Option<f64>,
    pub d_des_update_period: Option<f64>,
    pub iso_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetingFile {
    pub n_targets: Option<usize>,
    /// Seconds between detection passes; `null` or absent never re-plans.
    pub delta_t_bar: Option<f64>,
    pub pt: Option<f64>,
    pub selection_rule: Option<SelectionRule>,
    pub post_capture_behavior: Option<PostCaptureBehavior>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationFile {
    pub dt: Option<f64>,
    pub t_f: f64,
    pub integrator: Option<Integrator>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowestEps1File {
    pub eps1_grid: Vec<f64>,
    pub d0_set: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureTimeFile {
    pub n_p_range: Vec<usize>,
    pub n_seeds: usize,
    pub placement: Placement,
}

/// Inputs of the `analyze` subcommands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFile {
    /// Selfish-parameter values for the dispersion study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_values: Option<Vec<f64>>,
    /// Alert distances at which the sweep's capture rate is measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1_ladder: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowest_eps1: Option<LowestEps1File>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_time: Option<CaptureTimeFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub dir: Option<PathBuf>,
}

/// On-disk form of a [`Scenario`] plus optional sweep and analysis blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub metadata: Metadata,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub roles: RolesFile,
    pub agents: Vec<AgentFile>,
    #[serde(default)]
    pub engagement: EngagementFile,
    #[serde(default)]
    pub multi: MultiFile,
    #[serde(default)]
    pub targeting: TargetingFile,
    pub integration: IntegrationFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputFile>,
}

#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub metadata: Metadata,
    pub scenario: Scenario,
    pub sweep: Option<SweepGrid>,
    pub analysis: Option<AnalysisFile>,
    pub output_dir: Option<PathBuf>,
    /// `key = value` for every default filled in while resolving the file.
    pub defaults_filled: Vec<String>,
}

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T: std::fmt::Debug + Copy>(&mut self, key: &str, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.0.push(format!("{key} = {default:?}"));
            default
        })
    }
}

const DEFAULT_K: f64 = 5.0;

fn resolve_params(key: &str, own: ParamsFile, role: ParamsFile, defaults: &mut Defaults) -> Result<AgentParams> {
    let need = |name: &str, a: Option<f64>, b: Option<f64>| {
        a.or(b)
            .ok_or_else(|| Error::Config(format!("{key}.{name} is required (per agent or under roles)")))
    };
    let k = match own.k.or(role.k) {
        Some(k) => k,
        None => defaults.take(&format!("{key}.k"), None, DEFAULT_K),
    };
    Ok(AgentParams {
        v_max: need("v_max", own.v_max, role.v_max)?,
        w_max: need("w_max", own.w_max, role.w_max)?,
        r: need("r", own.r, role.r)?,
        a: need("a", own.a, role.a)?,
        c: need("c", own.c, role.c)?,
        k,
    })
}

impl ScenarioFile {
    pub fn resolve(&self) -> Result<LoadedScenario> {
        let mut d = Defaults(Vec::new());
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.iter().enumerate() {
            let role_defaults = match a.role {
                Role::Pursuer => self.roles.pursuer,
                Role::Evader => self.roles.evader,
            };
            let key = format!("agents[{i}]");
            let params = resolve_params(&key, a.params.unwrap_or_default(), role_defaults, &mut d)?;
            let v = d.take(&format!("{key}.v"), a.v, 0.0);
            let initial = AgentState::new(i, a.role, a.x, a.y, a.theta).with_speed(v);
            agents.push(AgentSpec { params, initial });
        }
        let e = &self.engagement;
        let ed = EngagementConfig::default();
        let engagement = EngagementConfig {
            eps1: d.take("engagement.eps1", e.eps1, ed.eps1),
            eps2: d.take("engagement.eps2", e.eps2, ed.eps2),
            bar_theta: d.take("engagement.bar_theta", e.bar_theta, ed.bar_theta),
            align_hysteresis: d.take("engagement.align_hysteresis", e.align_hysteresis, ed.align_hysteresis),
            turn_rule: d.take("engagement.turn_rule", e.turn_rule, ed.turn_rule),
        };
        let math = MathConfig {
            gamma: d.take("engagement.gamma", e.gamma, MathConfig::default().gamma),
        };
        let m = &self.multi;
        let md = MultiConfig::default();
        let multi = MultiConfig {
            alpha: d.take("multi.alpha", m.alpha, md.alpha),
            k_beta: d.take("multi.k_beta", m.k_beta, md.k_beta),
            m_rep: d.take("multi.m_rep", m.m_rep, md.m_rep),
            d_safe: d.take("multi.d_safe", m.d_safe, md.d_safe),
            d_des_update_period: m.d_des_update_period,
            iso_threshold: m.iso_threshold,
        };
        let t = &self.targeting;
        let td = TargetingConfig::default();
        let targeting = TargetingConfig {
            n_targets: t.n_targets,
            delta_t_bar: t.delta_t_bar,
            pt: d.take("targeting.pt", t.pt, td.pt),
            selection_rule: d.take("targeting.selection_rule", t.selection_rule, td.selection_rule),
            post_capture_behavior: d.take(
                "targeting.post_capture_behavior",
                t.post_capture_behavior,
                td.post_capture_behavior,
            ),
        };
        let ig = &self.integration;
        let scenario = Scenario {
            name: self.metadata.name.clone(),
            agents,
            engagement,
            math,
            multi,
            targeting,
            dt: d.take("integration.dt", ig.dt, 0.005),
            t_f: ig.t_f,
            integrator: d.take("integration.integrator", ig.integrator, Integrator::Euler),
            seed: d.take("integration.seed", ig.seed, 0),
            mode: d.take("mode", self.mode, Mode::SingleVsSingle),
        };
        scenario.validate()?;
        check_reference(&self.metadata, |path| param_value(&scenario, path))?;
        let sweep = match &self.sweep {
            Some(s) => {
                let grid = SweepGrid {
                    axes: s.axes.clone(),
                    base: scenario.clone(),
                    overrides: s.overrides.clone(),
                };
                grid.validate()?;
                Some(grid)
            }
            None => None,
        };
        Ok(LoadedScenario {
            metadata: self.metadata.clone(),
            scenario,
            sweep,
            analysis: self.analysis.clone(),
            output_dir: self.output.as_ref().and_then(|o| o.dir.clone()),
            defaults_filled: d.0,
        })
    }

    /// Fully explicit file for a scenario; resolving it gives the scenario back.
    pub fn from_scenario(sc: &Scenario) -> Self {
        let e = sc.engagement;
        let m = sc.multi;
        let t = sc.targeting;
        Self {
            metadata: Metadata {
                name: sc.name.clone(),
                ..Default::default()
            },
            mode: Some(sc.mode),
            roles: RolesFile::default(),
            agents: sc
                .agents
                .iter()
                .map(|a| AgentFile {
                    role: a.initial.role,
                    x: a.initial.x,
                    y: a.initial.y,
                    theta: a.initial.theta,
                    v: Some(a.initial.v),
                    params: Some(a.params.into()),
                })
                .collect(),
            engagement: EngagementFile {
                eps1: Some(e.eps1),
                eps2: Some(e.eps2),
                bar_theta: Some(e.bar_theta),
                align_hysteresis: Some(e.align_hysteresis),
                turn_rule: Some(e.turn_rule),
                gamma: Some(sc.math.gamma),
            },
            multi: MultiFile {
                alpha: Some(m.alpha),
                k_beta: Some(m.k_beta),
                m_rep: Some(m.m_rep),
                d_safe: Some(m.d_safe),
                d_des_update_period: m.d_des_update_period,
                iso_threshold: m.iso_threshold,
            },
            targeting: TargetingFile {
                n_targets: t.n_targets,
                delta_t_bar: t.delta_t_bar,
                pt: Some(t.pt),
                selection_rule: Some(t.selection_rule),
                post_capture_behavior: Some(t.post_capture_behavior),
            },
            integration: IntegrationFile {
                dt: Some(sc.dt),
                t_f: sc.t_f,
                integrator: Some(sc.integrator),
                seed: Some(sc.seed),
            },
            sweep: None,
            analysis: None,
            output: None,
        }
    }
}

fn check_reference(meta: &Metadata, read: impl Fn(&str) -> Result<f64>) -> Result<()> {
    for (path, &want) in &meta.reference {
        let got = read(path)?;
        if got != want {
            return Err(Error::Config(format!(
                "metadata.reference.{path}: file resolves to {got}, reference value is {want}"
            )));
        }
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

/// Reads, validates and resolves a scenario file, logging every filled default.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let file: ScenarioFile = read_json(path)?;
    let loaded = file.resolve().map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    for d in &loaded.defaults_filled {
        info!("{}: default {d}", path.display());
    }
    Ok(loaded)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    Ok(load_scenario(path)?.scenario)
}

pub fn write_scenario_json(sc: &Scenario, path: &Path) -> Result<()> {
    write_report_json(&ScenarioFile::from_scenario(sc), path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Inputs {
    /// Initial offsets, one trajectory each.
    pub q0: Vec<[f64; 2]>,
    pub d_des: f64,
    pub t_end: f64,
    pub dt: f64,
}

/// Inputs of the `verify` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    pub metadata: Metadata,
    #[serde(default)]
    pub theorem1: Option<Theorem1Inputs>,
    #[serde(default)]
    pub theorem2: Option<Theorem2Inputs>,
}

pub fn load_verify(path: &Path) -> Result<VerifyFile> {
    let file: VerifyFile = read_json(path)?;
    if let Some(inp) = &file.theorem1 {
        inp.validate()?;
        let value = serde_json::to_value(inp).expect("plain struct serializes");
        check_reference(&file.metadata, |key| {
            value
                .get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Config(format!("metadata.reference.{key}: no such theorem1 field")))
        })
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(file)
}

/// `%.9g`-style rendering: 9 significant digits, trailing zeros dropped.
pub fn fmt_sig9(x: f64) -> String {
    const SIG: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIG).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mant));
    }
    let decimals = (SIG - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.into(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn write_trace_csv(trace: &SimTrace, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.into(),
        source,
    };
    let mut out = create(path)?;
    writeln!(out, "{TRACE_HEADER}").map_err(io_err)?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_sig9(r.t),
            r.agent_id,
            r.role.as_str(),
            fmt_sig9(r.x),
            fmt_sig9(r.y),
            fmt_sig9(r.theta),
            fmt_sig9(r.v),
            fmt_sig9(r.w),
            r.phase.as_str(),
            r.target_id.map(|t| t.to_string()).unwrap_or_default(),
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = result.axes.iter().map(|a| a.path.clone()).collect();
    header.extend(["min_distance", "captured", "t_d", "error"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for cell in &result.cells {
        let mut row: Vec<String> = cell.values.iter().map(|v| v.to_string()).collect();
        match &cell.outcome {
            Ok(c) => row.extend([
                c.min_distance.to_string(),
                c.captured.to_string(),
                c.t_d.to_string(),
                String::new(),
            ]),
            Err(msg) => row.extend([String::new(), String::new(), String::new(), msg.clone()]),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepResult> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let n_axes = header
        .len()
        .checked_sub(4)
        .filter(|&n| (1..=2).contains(&n))
        .ok_or_else(|| bad(format!("unexpected sweep header {header:?}")))?;
    let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(format!("bad {what} `{s}`")));
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let values = (0..n_axes)
            .map(|i| num(&rec[i], &header[i]))
            .collect::<Result<Vec<_>>>()?;
        let error = &rec[n_axes + 3];
        let outcome = if error.is_empty() {
            Ok(CellResult {
                min_distance: num(&rec[n_axes], "min_distance")?,
                captured: rec[n_axes + 1]
                    .parse()
                    .map_err(|_| bad(format!("bad captured `{}`", &rec[n_axes + 1])))?,
                t_d: num(&rec[n_axes + 2], "t_d")?,
            })
        } else {
            Err(error.to_string())
        };
        cells.push(SweepCell { values, outcome });
    }
    // row-major layout: each axis lists its values in order of first appearance
    let axes = (0..n_axes)
        .map(|i| {
            let mut values: Vec<f64> = Vec::new();
            for c in &cells {
                if !values.contains(&c.values[i]) {
                    values.push(c.values[i]);
                }
            }
            SweepAxis {
                path: header[i].clone(),
                values,
            }
        })
        .collect();
    Ok(SweepResult { axes, cells })
}

/// Pretty JSON; floats are written in shortest round-trip form.
pub fn write_report_json<T: Serialize + ?Sized>(report: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, report).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    writeln!(out).and_then(|_| out.flush()).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub summary: crate::engine::RunSummary,
    pub events: Vec<crate::engine::Event>,
}

impl RunReport {
    pub fn new(name: &str, trace: &SimTrace) -> Self {
        Self {
            scenario: name.into(),
            summary: trace.summary.clone(),
            events: trace.events.clone(),
        }
    }
}
