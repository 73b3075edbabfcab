use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde_json::{json, Value};

use pursuit_core::analysis::{
    apply_param, capture_rate, capture_time_study, dispersion_over_alpha, eps1_ladder_rates, lowest_alert_distance,
    run_sweep,
};
use pursuit_core::io::{self, LoadedScenario, RunReport};
use pursuit_core::verify::{theorem1_check, theorem2_reduced_ode};
use pursuit_core::{Error, Result};

const DEFAULT_ALPHAS: [f64; 4] = [0.0, 0.3, 0.6, 1.0];

#[derive(Debug, Parser)]
#[command(
    name = "pursuit-sim",
    version,
    about = "Pursuit-evasion simulator for unicycle robots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace and summary.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the integration step.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the sweep block of a scenario and write one CSV row per cell.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the capture conditions or the formation dynamics.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Run-level statistics.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    Theorem1 { inputs: PathBuf },
    Theorem2 { inputs: PathBuf },
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Dispersion degree over the selfish parameter.
    Dispersion {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capture rate of the sweep grid at each value of the eps1 ladder.
    Rates {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lowest escaping alert distance, per value of a one-axis sweep if present.
    LowestEps1 {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full-capture time against pursuer count over seeded layouts.
    CaptureTime {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("json value serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Run {
            scenario,
            out,
            dt,
            seed,
        } => run(&scenario, out, dt, seed),
        Command::Sweep { scenario, out } => sweep(&scenario, out),
        Command::Verify {
            what: VerifyCommand::Theorem1 { inputs },
        } => verify_theorem1(&inputs),
        Command::Verify {
            what: VerifyCommand::Theorem2 { inputs },
        } => verify_theorem2(&inputs),
        Command::Analyze { what } => match what {
            AnalyzeCommand::Dispersion { scenario, out } => dispersion(&scenario, out),
            AnalyzeCommand::Rates { scenario, out } => rates(&scenario, out),
            AnalyzeCommand::LowestEps1 { scenario, out } => lowest_eps1(&scenario, out),
            AnalyzeCommand::CaptureTime { scenario, out } => capture_time(&scenario, out),
        },
    }
}

fn out_dir(loaded: &LoadedScenario, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| loaded.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&loaded.metadata.name));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn run(path: &Path, out: Option<PathBuf>, dt: Option<f64>, seed: Option<u64>) -> Result<Value> {
    let mut loaded = io::load_scenario(path)?;
    if let Some(dt) = dt {
        apply_param(&mut loaded.scenario, "integration.dt", dt)?;
    }
    if let Some(seed) = seed {
        loaded.scenario.seed = seed;
    }
    loaded.scenario.validate()?;
    let dir = out_dir(&loaded, out)?;
    let trace = pursuit_core::run(&loaded.scenario)?;
    let trace_path = dir.join("trace.csv");
    let summary_path = dir.join("summary.json");
    io::write_trace_csv(&trace, &trace_path)?;
    let report = RunReport::new(&loaded.metadata.name, &trace);
    io::write_report_json(&report, &summary_path)?;
    info!("wrote {} and {}", trace_path.display(), summary_path.display());
    Ok(json!({
        "scenario": loaded.metadata.name,
        "trace": trace_path,
        "summary_file": summary_path,
        "summary": report.summary,
        "events": report.events,
    }))
}

fn sweep(path: &Path, out: Option<PathBuf>) -> Result<Value> {
    let loaded = io::load_scenario(path)?;
    let grid = loaded
        .sweep
        .clone()
        .ok_or_else(|| Error::Config(format!("{}: no sweep block", path.display())))?;
    let dir = out_dir(&loaded, out)?;
    let result = run_sweep(&grid)?;
    let csv_path = dir.join("sweep.csv");
    io::write_sweep_csv(&result, &csv_path)?;
    info!("wrote {} ({} cells)", csv_path.display(), result.cells.len());
    Ok(json!({
        "scenario": loaded.metadata.name,
        "csv": csv_path,
        "cells": result.cells.len(),
        "failed": result.n_failed(),
        "capture_rate": capture_rate(&result).ok(),
    }))
}

fn verify_theorem1(path: &Path) -> Result<Value> {
    let file = io::load_verify(path)?;
    let inputs = file
        .theorem1
        .ok_or_else(|| Error::Config(format!("{}: no theorem1 block", path.display())))?;
    let report = theorem1_check(&inputs)?;
    Ok(json!({ "name": file.metadata.name, "inputs": inputs, "report": report }))
}

fn verify_theorem2(path: &Path) -> Result<Value> {
    let file = io::load_verify(path)?;
    let inp = file
        .theorem2
        .ok_or_else(|| Error::Config(format!("{}: no theorem2 block", path.display())))?;
    let mut rows = Vec::new();
    for &q0 in &inp.q0 {
        let tr = theorem2_reduced_ode(q0, inp.d_des, inp.t_end, inp.dt)?;
        rows.push(json!({
            "q0": q0,
            "initial_norm": q0[0].hypot(q0[1]),
            "final_norm": tr.final_norm,
            "abs_error": (tr.final_norm - inp.d_des).abs(),
            "lyapunov_monotone": tr.monotone,
            "samples": tr.q.len(),
        }));
    }
    Ok(
        json!({ "name": file.metadata.name, "d_des": inp.d_des, "t_end": inp.t_end, "dt": inp.dt, "trajectories": rows }),
    )
}

fn dispersion(path: &Path, out: Option<PathBuf>) -> Result<Value> {
    let loaded = io::load_scenario(path)?;
    let alphas = loaded
        .analysis
        .as_ref()
        .and_then(|a| a.alpha_values.clone())
        .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let rows = dispersion_over_alpha(&loaded.scenario, &alphas)?;
    let non_decreasing = rows.windows(2).all(|w| w[1].dispersion >= w[0].dispersion);
    let value = json!({ "scenario": loaded.metadata.name, "dispersion": rows, "non_decreasing": non_decreasing });
    save(&loaded, out, "dispersion.json", &value)?;
    Ok(value)
}

fn rates(path: &Path, out: Option<PathBuf>) -> Result<Value> {
    let loaded = io::load_scenario(path)?;
    let grid = loaded
        .sweep
        .clone()
        .ok_or_else(|| Error::Config(format!("{}: rates need a sweep block", path.display())))?;
    let ladder = loaded
        .analysis
        .as_ref()
        .and_then(|a| a.eps1_ladder.clone())
        .ok_or_else(|| Error::Config(format!("{}: rates need analysis.eps1_ladder", path.display())))?;
    let rows = eps1_ladder_rates(&grid, &ladder)?;
    let value = json!({ "scenario": loaded.metadata.name, "rates": rows });
    save(&loaded, out, "rates.json", &value)?;
    Ok(value)
}

fn lowest_eps1(path: &Path, out: Option<PathBuf>) -> Result<Value> {
    let loaded = io::load_scenario(path)?;
    let spec = loaded
        .analysis
        .as_ref()
        .and_then(|a| a.lowest_eps1.clone())
        .ok_or_else(|| Error::Config(format!("{}: needs analysis.lowest_eps1", path.display())))?;
    let rows = match &loaded.sweep {
        None => vec![json!(lowest_alert_distance(
            &spec.eps1_grid,
            &spec.d0_set,
            &loaded.scenario
        )?)],
        Some(grid) => {
            let [axis] = grid.axes.as_slice() else {
                return Err(Error::Config(format!(
                    "{}: lowest-eps1 takes a one-axis sweep",
                    path.display()
                )));
            };
            let mut rows = Vec::new();
            for &value in &axis.values {
                let mut sc = loaded.scenario.clone();
                for (p, v) in &grid.overrides {
                    apply_param(&mut sc, p, *v)?;
                }
                apply_param(&mut sc, &axis.path, value)?;
                sc.validate()?;
                let mut row = json!(lowest_alert_distance(&spec.eps1_grid, &spec.d0_set, &sc)?);
                row[axis.path.as_str()] = json!(value);
                rows.push(row);
            }
            rows
        }
    };
    let value = json!({ "scenario": loaded.metadata.name, "lowest_eps1": rows });
    save(&loaded, out, "lowest_eps1.json", &value)?;
    Ok(value)
}

fn capture_time(path: &Path, out: Option<PathBuf>) -> Result<Value> {
    let loaded = io::load_scenario(path)?;
    let spec = loaded
        .analysis
        .as_ref()
        .and_then(|a| a.capture_time.clone())
        .ok_or_else(|| Error::Config(format!("{}: needs analysis.capture_time", path.display())))?;
    let table = capture_time_study(&spec.n_p_range, spec.n_seeds, &loaded.scenario, &spec.placement)?;
    let value = json!({ "scenario": loaded.metadata.name, "capture_time": table });
    save(&loaded, out, "capture_time.json", &value)?;
    Ok(value)
}

fn save(loaded: &LoadedScenario, out: Option<PathBuf>, file: &str, value: &Value) -> Result<()> {
    let path = out_dir(loaded, out)?.join(file);
    io::write_report_json(value, &path)?;
    info!("wrote {}", path.display());
    Ok(())
}
