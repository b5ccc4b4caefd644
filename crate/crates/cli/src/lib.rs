//! File formats, configuration and drivers behind the `metagpe` binary.

pub mod config;
pub mod drivers;
pub mod error;
pub mod heatmap;
pub mod io;
pub mod tracker;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{Category, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Evolve,
    GroundState,
    Dispersion,
    Quench,
    Solitons,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::GroundState => "groundstate",
            Command::Dispersion => "dispersion",
            Command::Quench => "quench",
            Command::Solitons => "solitons",
        }
    }

    /// Config sections the command reads.
    pub fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Evolve => &["grid", "physics", "initial", "integration", "output"],
            Command::GroundState => &["grid", "physics", "initial", "output", "groundstate"],
            Command::Dispersion => &["grid", "physics", "output", "dispersion"],
            Command::Quench => &["grid", "physics", "initial", "integration", "output", "quench"],
            Command::Solitons => &["grid", "physics", "initial", "integration", "output", "tracking"],
        }
    }
}

/// Human-readable lines for standard output plus a JSON summary for the metadata file.
pub struct Report {
    pub text: String,
    pub summary: Value,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Report> {
    let mut text = String::new();
    let summary = match command {
        Command::Evolve => {
            let t = drivers::run_evolve(cfg)?;
            let last = t.sink.records.last().copied();
            writeln!(text, "steps {} dt {:.6e} ({})", t.summary.steps, t.summary.dt, t.summary.dynamics).ok();
            if let Some(r) = last {
                writeln!(text, "final t {:.6e} norm {:.15e} free energy {:.9e}", r.t, r.norm, r.free_energy).ok();
            }
            writeln!(text, "max |dN|/N {:.3e}", t.summary.max_relative_norm_change).ok();
            to_value(&t.summary)
        }
        Command::Solitons => {
            let run = drivers::run_solitons(cfg)?;
            let s = &run.summary;
            writeln!(text, "tracked {} frames", s.tracked_frames).ok();
            if let Some(t) = s.lost_at_time {
                writeln!(text, "solitons lost at t = {t:.6e}").ok();
            }
            writeln!(text, "max drift {:.3e} cells", s.max_drift_cells).ok();
            writeln!(text, "max min-density/mean {:.3e}", s.max_relative_depth).ok();
            writeln!(
                text,
                "residual |Q eta|/|psi|: initial {:.3e} final {:.3e}",
                s.initial_residual, s.final_residual
            )
            .ok();
            json!({ "trajectory": to_value(&run.trajectory.summary), "solitons": to_value(s) })
        }
        Command::GroundState => {
            let gs = drivers::run_groundstate(cfg)?;
            let s = &gs.summary;
            writeln!(
                text,
                "mu {:.12e} after {} iterations (residual {:.3e}), free energy {:.12e}",
                s.mu, s.iterations, s.residual, s.free_energy
            )
            .ok();
            to_value(s)
        }
        Command::Dispersion => {
            let rows = drivers::run_dispersion(cfg)?;
            writeln!(text, "{}", drivers::DISPERSION_HEADER).ok();
            for r in &rows {
                writeln!(text, "{}", r.csv()).ok();
            }
            to_value(&rows)
        }
        Command::Quench => {
            let q = drivers::run_quench(cfg)?;
            writeln!(text, "seed  occ_pre      occ_post     F monotone  thermalized").ok();
            for s in &q.seeds {
                writeln!(
                    text,
                    "{:<5} {:.6e} {:.6e} {:<11} {}",
                    s.seed,
                    s.occ_pre(),
                    s.occ_at_stage_end,
                    s.free_energy_monotone,
                    s.thermalized.map_or("n/a".into(), |b| b.to_string())
                )
                .ok();
            }
            writeln!(text, "median occupation: pre {:.6e} post {:.6e}", q.median_pre, q.median_post).ok();
            to_value(&q)
        }
    };
    Ok(Report { text, summary })
}

/// Metadata written next to the outputs: enough to rerun the command.
pub fn metadata(
    command: Command,
    cfg: &RunConfig,
    wall_time: f64,
    outcome: std::result::Result<&Report, &CliError>,
) -> Value {
    let (status, summary, error) = match outcome {
        Ok(r) => ("ok", r.summary.clone(), Value::Null),
        Err(e) => (
            "error",
            Value::Null,
            json!({ "category": e.category().name(), "exit_code": e.category().exit_code(), "message": e.to_string() }),
        ),
    };
    json!({
        "command": command.name(),
        "config_path": cfg.path,
        "config_text": cfg.text,
        "resolved_config": to_value(cfg),
        "defaults_applied": cfg.defaults_in(command.sections()),
        "versions": {
            "metagpe": metagpe::VERSION,
            "metagpe-cli": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_seconds": wall_time,
        "status": status,
        "error": error,
        "summary": summary,
    })
}

/// Parses `path`, runs `command` and writes `metadata.json` to the output directory.
pub fn run_command(command: Command, path: &Path) -> Result<Report> {
    let cfg = parse_config(path)?;
    let start = Instant::now();
    let outcome = execute(command, &cfg);
    let meta = metadata(command, &cfg, start.elapsed().as_secs_f64(), outcome.as_ref());
    let dir = &cfg.output.directory;
    let written = drivers::ensure_dir(dir).and_then(|_| {
        let p = dir.join("metadata.json");
        std::fs::write(&p, serde_json::to_string_pretty(&meta).expect("json")).map_err(|e| CliError::io(p, e))
    });
    match (outcome, written) {
        (Err(e), _) => Err(e),
        (Ok(_), Err(e)) => Err(e),
        (Ok(r), Ok(())) => Ok(r),
    }
}
