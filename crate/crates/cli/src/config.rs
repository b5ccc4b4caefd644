//! Run configuration: TOML files with the sections `[grid]`, `[physics]`,
//! `[initial]`, `[integration]`, `[output]` and the per-command sections
//! `[dispersion]`, `[groundstate]`, `[quench]`, `[tracking]`.
//!
//! Every key is checked; unknown keys and sections are errors. Optional keys
//! that were left out are listed in [`RunConfig::defaults`] so the metadata
//! file can echo them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use metagpe::dynamics::{auto_time_step, check_time_step, LambdaSchedule, Stage};
use metagpe::states::{SolitonSpec, ThermalSpec};
use metagpe::{DynamicsKind, Grid1D};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    physics: Option<RawPhysics>,
    initial: Option<RawInitial>,
    integration: Option<RawIntegration>,
    output: Option<RawOutput>,
    dispersion: Option<RawDispersion>,
    groundstate: Option<RawGroundState>,
    quench: Option<RawQuench>,
    tracking: Option<RawTracking>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n_points: Option<usize>,
    length: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    coupling: Option<f64>,
    mu: Option<f64>,
    lambda: Option<f64>,
    dynamics: Option<String>,
    stages: Option<Vec<RawStage>>,
    potential: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    duration: f64,
    lambda: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Option<String>,
    mode: Option<i64>,
    solitons: Option<Vec<RawSoliton>>,
    temperature: Option<f64>,
    mode_cutoff: Option<usize>,
    seed: Option<u64>,
    condensate_fraction: Option<f64>,
    path: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSoliton {
    position: f64,
    #[serde(default)]
    speed_fraction: f64,
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum RawStep {
    Fixed(f64),
    Named(String),
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum RawSwitch {
    Flag(bool),
    Named(String),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    dt: Option<RawStep>,
    t_end: Option<f64>,
    snapshot_stride: Option<u64>,
    observable_stride: Option<u64>,
    renormalize: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    heatmap: Option<RawSwitch>,
    formats: Option<Vec<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDispersion {
    modes: Option<Vec<i64>>,
    lambdas: Option<Vec<f64>>,
    amplitude: Option<f64>,
    periods: Option<f64>,
    samples: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGroundState {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawQuench {
    seeds: Option<Vec<u64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTracking {
    count: Option<usize>,
    depth_fraction: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridConfig {
    pub n_points: usize,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhysicsConfig {
    pub coupling: f64,
    pub mu: f64,
    pub dynamics: String,
    /// Constant-λ stages; a plain `lambda` key becomes one stage of length `t_end`.
    pub stages: Vec<StageConfig>,
    pub potential: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StageConfig {
    pub duration: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialConfig {
    Uniform,
    PlaneWave {
        mode: i64,
    },
    Solitons {
        solitons: Vec<SolitonConfig>,
    },
    Thermal {
        temperature: f64,
        mode_cutoff: usize,
        seed: u64,
        condensate_fraction: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolitonConfig {
    pub position: f64,
    pub speed_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegrationConfig {
    /// `"auto"` or the literal value, as written.
    pub dt_setting: String,
    pub dt: f64,
    pub snapshot_stride: u64,
    pub observable_stride: u64,
    pub renormalize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Observables CSV.
    Csv,
    /// Binary GPF1 snapshots.
    Gpf1,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub heatmap: bool,
    pub formats: Vec<OutputFormat>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DispersionSection {
    pub modes: Vec<i64>,
    pub lambdas: Vec<f64>,
    pub amplitude: f64,
    pub periods: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateSection {
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuenchSection {
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackingSection {
    pub count: usize,
    /// Minima deeper than this fraction of the mean density count as solitons.
    pub depth_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub path: PathBuf,
    #[serde(skip)]
    pub text: String,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub initial: Option<InitialConfig>,
    pub integration: Option<IntegrationConfig>,
    pub output: OutputConfig,
    pub dispersion: DispersionSection,
    pub groundstate: GroundStateSection,
    pub quench: QuenchSection,
    pub tracking: TrackingSection,
    /// `section.key → value` for every optional key that took its default.
    pub defaults: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.grid.n_points, self.grid.length).expect("validated grid")
    }

    pub fn dynamics_kind(&self) -> DynamicsKind {
        self.physics.dynamics.parse().expect("validated dynamics")
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.physics
            .stages
            .iter()
            .map(|s| Stage {
                duration: s.duration,
                lambda: s.lambda,
            })
            .collect()
    }

    pub fn t_end(&self) -> f64 {
        self.physics.stages.iter().map(|s| s.duration).sum()
    }

    pub fn error(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.path.clone(),
            line: key_line(&self.text, section, key),
            key: format!("{section}.{key}"),
            message: message.into(),
        }
    }

    /// The λ schedule of a time-stepping run.
    pub fn schedule(&self) -> Result<LambdaSchedule> {
        if self.physics.stages.iter().any(|s| s.duration <= 0.0) {
            return Err(self.error("integration", "t_end", "missing run length (`integration.t_end` or `physics.stages`)"));
        }
        Ok(LambdaSchedule::new(self.stages())?)
    }

    pub fn integration(&self) -> Result<&IntegrationConfig> {
        self.integration
            .as_ref()
            .ok_or_else(|| self.error("integration", "t_end", "missing section [integration]"))
    }

    pub fn initial(&self) -> Result<&InitialConfig> {
        self.initial
            .as_ref()
            .ok_or_else(|| self.error("initial", "kind", "missing section [initial]"))
    }

    /// Defaults belonging to the given sections.
    pub fn defaults_in(&self, sections: &[&str]) -> BTreeMap<String, String> {
        self.defaults
            .iter()
            .filter(|(k, _)| sections.iter().any(|s| k.split('.').next() == Some(*s)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn thermal_spec(&self) -> Option<ThermalSpec> {
        match self.initial {
            Some(InitialConfig::Thermal {
                temperature,
                mode_cutoff,
                seed,
                condensate_fraction,
            }) => Some(ThermalSpec {
                temperature,
                mode_cutoff,
                seed,
                condensate_fraction,
            }),
            _ => None,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text, path)
}

/// Parses `text` as if read from `path`; relative file references resolve
/// against the directory of `path`.
pub fn parse_config_str(text: &str, path: &Path) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(text, s.start));
        CliError::Config {
            path: path.to_path_buf(),
            line,
            key: offending_key(e.message())
                .or_else(|| key_at_line(text, line))
                .unwrap_or_else(|| "<syntax>".into()),
            message: e.message().trim().to_string(),
        }
    })?;
    Resolver {
        text,
        path,
        base: path.parent().unwrap_or(Path::new(".")),
        defaults: BTreeMap::new(),
    }
    .resolve(raw)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, else of the section header, else 0.
fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut current = "";
    let mut header = 0;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim();
            if current == section {
                header = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header
}

/// `section.key` for a `key = ...` line, for errors that carry only a span.
fn key_at_line(text: &str, line: usize) -> Option<String> {
    let mut section = "";
    for raw in text.lines().take(line) {
        let l = raw.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim();
        }
    }
    let (key, _) = text.lines().nth(line.checked_sub(1)?)?.split_once('=')?;
    let key = key.trim();
    if key.is_empty() || key.starts_with('[') {
        return None;
    }
    Some(if section.is_empty() { key.to_string() } else { format!("{section}.{key}") })
}

fn offending_key(message: &str) -> Option<String> {
    let start = message.find('`')?;
    let rest = &message[start + 1..];
    let end = rest.find('`')?;
    Some(rest[..end].to_string())
}

struct Resolver<'a> {
    text: &'a str,
    path: &'a Path,
    base: &'a Path,
    defaults: BTreeMap<String, String>,
}

impl Resolver<'_> {
    fn error(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.path.to_path_buf(),
            line: key_line(self.text, section, key),
            key: format!("{section}.{key}"),
            message: message.into(),
        }
    }

    fn required<T>(&self, value: Option<T>, section: &str, key: &str) -> Result<T> {
        value.ok_or_else(|| self.error(section, key, "missing required key"))
    }

    fn or_default<T: std::fmt::Debug>(&mut self, value: Option<T>, section: &str, key: &str, default: T) -> T {
        value.unwrap_or_else(|| {
            self.defaults
                .insert(format!("{section}.{key}"), format!("{default:?}"));
            default
        })
    }

    fn positive(&self, v: f64, section: &str, key: &str) -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.error(section, key, format!("must be positive and finite, got {v}")))
        }
    }

    fn file(&self, name: &str, section: &str, key: &str) -> Result<PathBuf> {
        let p = self.base.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(self.error(section, key, format!("file {} does not exist", p.display())))
        }
    }

    fn resolve(mut self, raw: RawConfig) -> Result<RunConfig> {
        let grid_raw = self.required(raw.grid, "grid", "n_points")?;
        let n_points = self.required(grid_raw.n_points, "grid", "n_points")?;
        let length = self.or_default(grid_raw.length, "grid", "length", 1.0);
        self.positive(length, "grid", "length")?;
        let grid = Grid1D::new(n_points, length)
            .map_err(|e| self.error("grid", "n_points", e.to_string()))?;

        let physics_raw = self.required(raw.physics, "physics", "coupling")?;
        let coupling = self.required(physics_raw.coupling, "physics", "coupling")?;
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(self.error("physics", "coupling", format!("must be finite and >= 0, got {coupling}")));
        }
        let mu = self.or_default(physics_raw.mu, "physics", "mu", 0.0);
        if !mu.is_finite() {
            return Err(self.error("physics", "mu", "must be finite"));
        }
        let dynamics = self.or_default(physics_raw.dynamics, "physics", "dynamics", "metriplectic".to_string());
        if dynamics.parse::<DynamicsKind>().is_err() {
            return Err(self.error(
                "physics",
                "dynamics",
                format!("expected conservative, pitaevskii or metriplectic, got `{dynamics}`"),
            ));
        }
        let potential = match physics_raw.potential.as_deref() {
            None => {
                self.defaults.insert("physics.potential".into(), "\"none\"".into());
                None
            }
            Some("none") => None,
            Some(file) => Some(self.file(file, "physics", "potential")?),
        };

        let integration_raw = raw.integration;
        let t_end = integration_raw.as_ref().and_then(|i| i.t_end);
        let stages = match (physics_raw.stages, physics_raw.lambda) {
            (Some(_), Some(_)) => {
                return Err(self.error("physics", "lambda", "give either `lambda` or `stages`, not both"))
            }
            (Some(stages), None) => {
                if t_end.is_some() {
                    return Err(self.error(
                        "integration",
                        "t_end",
                        "run length is set by the stage durations when `physics.stages` is given",
                    ));
                }
                if stages.is_empty() {
                    return Err(self.error("physics", "stages", "needs at least one stage"));
                }
                for s in &stages {
                    self.positive(s.duration, "physics", "stages")?;
                    if !(s.lambda.is_finite() && s.lambda >= 0.0) {
                        return Err(self.error("physics", "stages", format!("lambda must be >= 0, got {}", s.lambda)));
                    }
                }
                stages
                    .into_iter()
                    .map(|s| StageConfig {
                        duration: s.duration,
                        lambda: s.lambda,
                    })
                    .collect()
            }
            (None, lambda) => {
                let lambda = self.or_default(lambda, "physics", "lambda", 0.0);
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(self.error("physics", "lambda", format!("must be finite and >= 0, got {lambda}")));
                }
                match t_end {
                    Some(t) => vec![StageConfig {
                        duration: self.positive(t, "integration", "t_end")?,
                        lambda,
                    }],
                    None => vec![StageConfig { duration: 0.0, lambda }],
                }
            }
        };

        let initial = match raw.initial {
            None => None,
            Some(r) => Some(self.initial(r, &grid)?),
        };

        let integration = match integration_raw {
            None => None,
            Some(r) => Some(self.integration(r, &grid)?),
        };

        let output_raw = raw.output.unwrap_or_default();
        let directory = self.or_default(output_raw.directory, "output", "directory", "output".to_string());
        let heatmap = match self.or_default(output_raw.heatmap, "output", "heatmap", RawSwitch::Flag(true)) {
            RawSwitch::Flag(b) => b,
            RawSwitch::Named(s) if s == "on" => true,
            RawSwitch::Named(s) if s == "off" => false,
            RawSwitch::Named(s) => {
                return Err(self.error("output", "heatmap", format!("expected on or off, got `{s}`")))
            }
        };
        let names = self.or_default(
            output_raw.formats,
            "output",
            "formats",
            vec!["csv".to_string(), "gpf1".to_string()],
        );
        let mut formats = Vec::new();
        for f in names {
            formats.push(match f.as_str() {
                "csv" => OutputFormat::Csv,
                "gpf1" => OutputFormat::Gpf1,
                other => return Err(self.error("output", "formats", format!("unknown format `{other}`"))),
            });
        }
        let output = OutputConfig {
            directory: self.base.join(directory),
            heatmap,
            formats,
        };

        let d = raw.dispersion.unwrap_or_default();
        let base_lambda = stages[0].lambda;
        let dispersion = DispersionSection {
            modes: self.or_default(d.modes, "dispersion", "modes", vec![1, 2, 3, 4]),
            lambdas: self.or_default(d.lambdas, "dispersion", "lambdas", vec![base_lambda]),
            amplitude: self.or_default(d.amplitude, "dispersion", "amplitude", 1e-4),
            periods: self.or_default(d.periods, "dispersion", "periods", 0.5),
            samples: self.or_default(d.samples, "dispersion", "samples", 400),
        };
        for &m in &dispersion.modes {
            if m == 0 || grid.mode_slot(m).is_err() {
                return Err(self.error("dispersion", "modes", format!("mode {m} is zero or outside the grid")));
            }
        }

        let gs = raw.groundstate.unwrap_or_default();
        let groundstate = GroundStateSection {
            tolerance: self.or_default(gs.tolerance, "groundstate", "tolerance", 1e-10),
            max_iterations: self.or_default(gs.max_iterations, "groundstate", "max_iterations", 100_000),
        };
        self.positive(groundstate.tolerance, "groundstate", "tolerance")?;

        let q = raw.quench.unwrap_or_default();
        let fallback_seed = match &initial {
            Some(InitialConfig::Thermal { seed, .. }) => *seed,
            _ => 0,
        };
        let quench = QuenchSection {
            seeds: self.or_default(q.seeds, "quench", "seeds", vec![fallback_seed]),
        };
        if quench.seeds.is_empty() {
            return Err(self.error("quench", "seeds", "needs at least one seed"));
        }

        let t = raw.tracking.unwrap_or_default();
        let soliton_count = match &initial {
            Some(InitialConfig::Solitons { solitons }) => solitons.len(),
            _ => 2,
        };
        let tracking = TrackingSection {
            count: self.or_default(t.count, "tracking", "count", soliton_count),
            depth_fraction: self.or_default(t.depth_fraction, "tracking", "depth_fraction", 0.5),
        };
        if tracking.count == 0 || !(tracking.depth_fraction > 0.0 && tracking.depth_fraction < 1.0) {
            return Err(self.error("tracking", "depth_fraction", "count must be >= 1 and depth_fraction in (0, 1)"));
        }

        Ok(RunConfig {
            path: self.path.to_path_buf(),
            text: self.text.to_string(),
            grid: GridConfig { n_points, length },
            physics: PhysicsConfig {
                coupling,
                mu,
                dynamics,
                stages,
                potential,
            },
            initial,
            integration,
            output,
            dispersion,
            groundstate,
            quench,
            tracking,
            defaults: self.defaults,
        })
    }

    fn initial(&mut self, r: RawInitial, grid: &Grid1D) -> Result<InitialConfig> {
        let kind = self.required(r.kind.clone(), "initial", "kind")?;
        let thermal_key = [
            ("temperature", r.temperature.is_some()),
            ("mode_cutoff", r.mode_cutoff.is_some()),
            ("seed", r.seed.is_some()),
            ("condensate_fraction", r.condensate_fraction.is_some()),
        ]
        .into_iter()
        .find(|(_, present)| *present)
        .map(|(k, _)| k);
        let stray = [
            ("mode", r.mode.is_some() && kind != "plane_wave"),
            ("solitons", r.solitons.is_some() && kind != "solitons"),
            ("path", r.path.is_some() && kind != "file"),
            (thermal_key.unwrap_or(""), thermal_key.is_some() && kind != "thermal"),
        ]
        .into_iter()
        .find(|(_, bad)| *bad);
        if let Some((key, _)) = stray {
            return Err(self.error("initial", key, format!("not used by initial kind `{kind}`")));
        }
        let out = match kind.as_str() {
            "uniform" => InitialConfig::Uniform,
            "plane_wave" => {
                let mode = self.required(r.mode, "initial", "mode")?;
                if grid.mode_slot(mode).is_err() {
                    return Err(self.error("initial", "mode", format!("mode {mode} outside the grid")));
                }
                InitialConfig::PlaneWave { mode }
            }
            "solitons" => {
                let list = self.required(r.solitons.as_ref(), "initial", "solitons")?;
                if list.is_empty() {
                    return Err(self.error("initial", "solitons", "needs at least one soliton"));
                }
                let mut solitons = Vec::new();
                for s in list {
                    SolitonSpec::new(s.position, s.speed_fraction)
                        .map_err(|e| self.error("initial", "solitons", e.to_string()))?;
                    solitons.push(SolitonConfig {
                        position: s.position,
                        speed_fraction: s.speed_fraction,
                    });
                }
                InitialConfig::Solitons { solitons }
            }
            "thermal" => {
                let temperature = self.required(r.temperature, "initial", "temperature")?;
                self.positive(temperature, "initial", "temperature")?;
                let mode_cutoff = self.required(r.mode_cutoff, "initial", "mode_cutoff")?;
                if mode_cutoff == 0 || mode_cutoff >= grid.n_points() / 2 {
                    return Err(self.error(
                        "initial",
                        "mode_cutoff",
                        format!("must lie in 1..{}", grid.n_points() / 2),
                    ));
                }
                let seed = self.or_default(r.seed, "initial", "seed", 0);
                let condensate_fraction = self.or_default(
                    r.condensate_fraction,
                    "initial",
                    "condensate_fraction",
                    ThermalSpec::DEFAULT_CONDENSATE_FRACTION,
                );
                if !(condensate_fraction.is_finite() && condensate_fraction >= 0.0) {
                    return Err(self.error("initial", "condensate_fraction", "must be >= 0"));
                }
                InitialConfig::Thermal {
                    temperature,
                    mode_cutoff,
                    seed,
                    condensate_fraction,
                }
            }
            "file" => {
                let name = self.required(r.path.as_deref(), "initial", "path")?;
                InitialConfig::File {
                    path: self.file(name, "initial", "path")?,
                }
            }
            other => {
                return Err(self.error(
                    "initial",
                    "kind",
                    format!("expected uniform, plane_wave, solitons, thermal or file, got `{other}`"),
                ))
            }
        };
        Ok(out)
    }

    fn integration(&mut self, r: RawIntegration, grid: &Grid1D) -> Result<IntegrationConfig> {
        let (dt_setting, dt) = match self.or_default(r.dt, "integration", "dt", RawStep::Named("auto".into())) {
            RawStep::Named(s) if s == "auto" => ("auto".to_string(), auto_time_step(grid)),
            RawStep::Named(s) => {
                return Err(self.error("integration", "dt", format!("expected \"auto\" or a number, got `{s}`")))
            }
            RawStep::Fixed(v) => {
                self.positive(v, "integration", "dt")?;
                (v.to_string(), v)
            }
        };
        check_time_step(grid, dt).map_err(|e| self.error("integration", "dt", e.to_string()))?;
        let snapshot_stride = self.or_default(r.snapshot_stride, "integration", "snapshot_stride", 1000);
        let observable_stride = self.or_default(r.observable_stride, "integration", "observable_stride", 100);
        if snapshot_stride == 0 {
            return Err(self.error("integration", "snapshot_stride", "must be >= 1"));
        }
        if observable_stride == 0 {
            return Err(self.error("integration", "observable_stride", "must be >= 1"));
        }
        Ok(IntegrationConfig {
            dt_setting,
            dt,
            snapshot_stride,
            observable_stride,
            renormalize: self.or_default(r.renormalize, "integration", "renormalize", false),
        })
    }
}
