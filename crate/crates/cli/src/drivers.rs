//! The five subcommands. Each returns an outcome struct, writes its files
//! under the configured output directory and leaves `metadata.json` to the
//! caller (see [`crate::run_command`]).

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use metagpe::bogoliubov::{analytic_dispersion, measure_dispersion, sound_wave_approximation, DispersionConfig};
use metagpe::dynamics::{evolve, ground_state_ite_observed, EvolutionConfig, EvolutionSink};
use metagpe::states::{plane_wave, soliton_train, thermal_sample, thermalization_check, uniform_state, SolitonSpec};
use metagpe::{
    density, observables, stationarity_residual, ComplexField, GpeError, Grid1D, ModelParams, ObservableRecord,
};
use serde::Serialize;

use crate::config::{InitialConfig, OutputFormat, RunConfig};
use crate::error::{CliError, Result};
use crate::heatmap::{emit_heatmap, HeatmapInfo};
use crate::io::{observable_row, read_snapshot, write_snapshot, CsvWriter, SnapshotHeader, OBSERVABLES_HEADER};
use crate::tracker::{track_solitons, SolitonTracks};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Whitespace-separated potential values, one per grid point; `#` starts a comment.
pub fn read_potential(path: &Path, grid: &Grid1D) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let values: Vec<f64> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(|v| {
            v.parse()
                .map_err(|e| CliError::Format(format!("{}: `{v}`: {e}", path.display())))
        })
        .collect::<Result<_>>()?;
    if values.len() != grid.n_points() {
        return Err(CliError::Format(format!(
            "{}: {} values for {} grid points",
            path.display(),
            values.len(),
            grid.n_points()
        )));
    }
    Ok(values)
}

/// Model parameters with λ of the first stage.
pub fn model_params(cfg: &RunConfig) -> Result<ModelParams> {
    let p = ModelParams::new(cfg.physics.coupling, cfg.physics.mu, cfg.physics.stages[0].lambda)?;
    match &cfg.physics.potential {
        None => Ok(p),
        Some(path) => Ok(p.with_potential(read_potential(path, &cfg.grid())?)?),
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct InitialInfo {
    pub kind: String,
    /// Background density of a soliton state.
    pub n0: Option<f64>,
    pub healing_length: Option<f64>,
    pub periodicity_defect: Option<f64>,
}

pub fn initial_state(cfg: &RunConfig, p: &ModelParams) -> Result<(ComplexField, InitialInfo)> {
    let grid = cfg.grid();
    let initial = cfg.initial()?;
    let mut info = InitialInfo::default();
    let field = match initial {
        InitialConfig::Uniform => {
            info.kind = "uniform".into();
            uniform_state(&grid)
        }
        InitialConfig::PlaneWave { mode } => {
            info.kind = "plane_wave".into();
            plane_wave(&grid, *mode)?
        }
        InitialConfig::Solitons { solitons } => {
            info.kind = "solitons".into();
            let specs = solitons
                .iter()
                .map(|s| SolitonSpec::new(s.position, s.speed_fraction))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let s = soliton_train(&grid, p, &specs)?;
            info.n0 = Some(s.n0);
            info.healing_length = Some(s.healing_length);
            info.periodicity_defect = Some(s.periodicity_defect);
            if s.periodicity_defect > 1e-10 {
                log::warn!("soliton product is not periodic: boundary defect {:.3e}", s.periodicity_defect);
            }
            s.field
        }
        InitialConfig::Thermal { .. } => {
            info.kind = "thermal".into();
            thermal_sample(&grid, p, &cfg.thermal_spec().expect("thermal"))?
        }
        InitialConfig::File { path } => {
            info.kind = "file".into();
            let (_, field) = read_snapshot(path)?;
            if field.grid() != &grid {
                return Err(cfg.error("initial", "path", "snapshot grid differs from [grid]"));
            }
            field
        }
    };
    Ok((field, info))
}

/// Streams observables to CSV and snapshots to GPF1 files while keeping
/// what the drivers need in memory.
pub struct FileSink {
    dir: PathBuf,
    csv: Option<CsvWriter>,
    write_snapshots: bool,
    keep_snapshots: bool,
    pub records: Vec<ObservableRecord>,
    /// `(t, λ, field)`.
    pub snapshots: Vec<(f64, f64, ComplexField)>,
    pub stage_ends: Vec<(usize, f64, ComplexField)>,
    pub snapshot_files: usize,
}

impl FileSink {
    pub fn new(dir: &Path, formats: &[OutputFormat], keep_snapshots: bool) -> Result<Self> {
        ensure_dir(dir)?;
        let csv = if formats.contains(&OutputFormat::Csv) {
            Some(CsvWriter::create(&dir.join("observables.csv"), OBSERVABLES_HEADER)?)
        } else {
            None
        };
        let write_snapshots = formats.contains(&OutputFormat::Gpf1);
        if write_snapshots {
            ensure_dir(&dir.join("snapshots"))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            write_snapshots,
            keep_snapshots,
            records: Vec::new(),
            snapshots: Vec::new(),
            stage_ends: Vec::new(),
            snapshot_files: 0,
        })
    }

    pub fn finish(&mut self) -> Result<()> {
        match self.csv.take() {
            Some(w) => w.finish(),
            None => Ok(()),
        }
    }
}

fn sink_error(e: CliError) -> GpeError {
    GpeError::Sink(e.to_string())
}

impl EvolutionSink for FileSink {
    fn record(&mut self, record: &ObservableRecord) -> metagpe::Result<()> {
        if let Some(w) = self.csv.as_mut() {
            w.row(&observable_row(record)).map_err(sink_error)?;
        }
        self.records.push(*record);
        Ok(())
    }

    fn snapshot(&mut self, field: &ComplexField, t: f64, lambda: f64) -> metagpe::Result<()> {
        if self.write_snapshots {
            let path = self
                .dir
                .join("snapshots")
                .join(format!("snap_{:05}.gpf1", self.snapshot_files));
            write_snapshot(field, &SnapshotHeader::new(field.grid(), t, lambda), &path).map_err(sink_error)?;
            self.snapshot_files += 1;
        }
        if self.keep_snapshots {
            self.snapshots.push((t, lambda, field.clone()));
        }
        Ok(())
    }

    fn stage_finished(&mut self, stage: usize, field: &ComplexField, t: f64) -> metagpe::Result<()> {
        self.stage_ends.push((stage, t, field.clone()));
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySummary {
    pub dynamics: String,
    pub dt: f64,
    pub steps: u64,
    pub renormalize: bool,
    pub records: usize,
    pub snapshot_files: usize,
    pub max_relative_norm_change: f64,
    pub initial: InitialInfo,
    pub heatmap: Option<HeatmapInfo>,
}

pub struct Trajectory {
    pub initial: ComplexField,
    pub final_field: ComplexField,
    pub params: ModelParams,
    pub sink: FileSink,
    pub summary: TrajectorySummary,
}

/// Evolves `psi0` with the configured schedule into `dir`.
pub fn run_trajectory(
    cfg: &RunConfig,
    psi0: ComplexField,
    params: ModelParams,
    info: InitialInfo,
    dir: &Path,
    keep_snapshots: bool,
) -> Result<Trajectory> {
    let integration = cfg.integration()?;
    let schedule = cfg.schedule()?;
    let kind = cfg.dynamics_kind();
    let mut ec = EvolutionConfig::new(integration.dt, integration.snapshot_stride, integration.observable_stride);
    ec.renormalize = integration.renormalize;
    let keep = keep_snapshots || cfg.output.heatmap;
    let mut sink = FileSink::new(dir, &cfg.output.formats, keep)?;
    let final_field = evolve(&psi0, &params, kind, &schedule, &ec, &mut sink)?;
    sink.finish()?;
    write_snapshot(
        &final_field,
        &SnapshotHeader::new(final_field.grid(), cfg.t_end(), schedule.stages().last().unwrap().lambda),
        &dir.join("final.gpf1"),
    )?;
    let heatmap = if cfg.output.heatmap && sink.snapshots.len() >= 2 {
        let frames: Vec<(f64, ComplexField)> = sink.snapshots.iter().map(|(t, _, f)| (*t, f.clone())).collect();
        Some(emit_heatmap(&frames, dir, "heatmap")?)
    } else {
        None
    };
    let n0 = sink.records.first().map_or(1.0, |r| r.norm);
    let max_relative_norm_change = sink
        .records
        .iter()
        .map(|r| (r.norm - n0).abs() / n0)
        .fold(0.0, f64::max);
    let summary = TrajectorySummary {
        dynamics: kind.name().into(),
        dt: integration.dt,
        steps: schedule.steps_per_stage(integration.dt).iter().sum(),
        renormalize: integration.renormalize,
        records: sink.records.len(),
        snapshot_files: sink.snapshot_files,
        max_relative_norm_change,
        initial: info,
        heatmap,
    };
    if !keep_snapshots && !cfg.output.heatmap {
        sink.snapshots.clear();
    }
    Ok(Trajectory {
        initial: psi0,
        final_field,
        params,
        sink,
        summary,
    })
}

pub fn run_evolve(cfg: &RunConfig) -> Result<Trajectory> {
    let p = model_params(cfg)?;
    let (psi0, info) = initial_state(cfg, &p)?;
    run_trajectory(cfg, psi0, p, info, &cfg.output.directory, false)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolitonSummary {
    pub tracked_frames: usize,
    pub lost_at_time: Option<f64>,
    pub max_drift_cells: f64,
    pub max_relative_depth: f64,
    pub final_relative_depth: Option<f64>,
    pub initial_residual: f64,
    pub final_residual: f64,
}

pub struct SolitonRun {
    pub trajectory: Trajectory,
    pub tracks: SolitonTracks,
    pub summary: SolitonSummary,
}

pub fn run_solitons(cfg: &RunConfig) -> Result<SolitonRun> {
    if !matches!(cfg.initial()?, InitialConfig::Solitons { .. }) {
        return Err(cfg.error("initial", "kind", "the solitons command needs kind = \"solitons\""));
    }
    let p = model_params(cfg)?;
    let (psi0, info) = initial_state(cfg, &p)?;
    let dir = cfg.output.directory.clone();
    let trajectory = run_trajectory(cfg, psi0, p, info, &dir, true)?;
    let grid = cfg.grid();
    let frames: Vec<(f64, Vec<f64>)> = trajectory
        .sink
        .snapshots
        .iter()
        .map(|(t, _, f)| (*t, density(f)))
        .collect();
    let tracks = track_solitons(&frames, grid.spacing(), cfg.tracking.count, cfg.tracking.depth_fraction);
    write_tracks(&tracks, &dir.join("solitons.csv"))?;
    let summary = SolitonSummary {
        tracked_frames: tracks.len(),
        lost_at_time: tracks.lost_at.map(|i| frames[i].0),
        max_drift_cells: tracks.max_drift(grid.spacing()),
        max_relative_depth: tracks.max_relative_depth(),
        final_relative_depth: if tracks.lost_at.is_none() && !tracks.is_empty() {
            let last = tracks.len() - 1;
            Some(
                tracks
                    .min_density
                    .iter()
                    .map(|m| m[last] / tracks.mean_density[last])
                    .fold(0.0, f64::max),
            )
        } else {
            None
        },
        initial_residual: stationarity_residual(&trajectory.initial, &trajectory.params)?,
        final_residual: stationarity_residual(&trajectory.final_field, &trajectory.params)?,
    };
    Ok(SolitonRun {
        trajectory,
        tracks,
        summary,
    })
}

fn write_tracks(tracks: &SolitonTracks, path: &Path) -> Result<()> {
    let count = tracks.positions.len();
    let mut header = vec!["t".to_string(), "mean_density".to_string()];
    for s in 0..count {
        header.push(format!("position_{s}"));
        header.push(format!("min_density_{s}"));
    }
    let mut w = CsvWriter::create(path, &header.join(","))?;
    for i in 0..tracks.len() {
        let mut row = vec![format!("{:e}", tracks.times[i]), format!("{:e}", tracks.mean_density[i])];
        for s in 0..count {
            row.push(format!("{:e}", tracks.positions[s][i]));
            row.push(format!("{:e}", tracks.min_density[s][i]));
        }
        w.row(&row.join(","))?;
    }
    w.finish()
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateSummary {
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
    pub free_energy: f64,
}

pub struct GroundStateRun {
    pub field: ComplexField,
    pub summary: GroundStateSummary,
}

pub fn run_groundstate(cfg: &RunConfig) -> Result<GroundStateRun> {
    let p = model_params(cfg)?.with_lambda(0.0);
    let psi0 = match cfg.initial {
        Some(_) => initial_state(cfg, &p)?.0,
        None => uniform_state(&cfg.grid()),
    };
    let dir = &cfg.output.directory;
    ensure_dir(dir)?;
    let mut log = CsvWriter::create(&dir.join("ite.csv"), "iteration,tau,residual")?;
    let mut write_error = None;
    let result = ground_state_ite_observed(
        &psi0,
        &p,
        cfg.groundstate.tolerance,
        cfg.groundstate.max_iterations,
        &mut |s| {
            if write_error.is_none() {
                if let Err(e) = log.row(&format!("{},{:e},{:e}", s.iteration, s.tau, s.residual)) {
                    write_error = Some(e);
                }
            }
        },
    );
    if let Some(e) = write_error {
        return Err(e);
    }
    log.finish()?;
    let gs = result?;
    let header = SnapshotHeader::new(gs.field.grid(), 0.0, 0.0);
    write_snapshot(&gs.field, &header, &dir.join("groundstate.gpf1"))?;
    let summary = GroundStateSummary {
        mu: gs.mu,
        iterations: gs.iterations,
        residual: gs.residual,
        free_energy: observables(&gs.field, &p, 0.0)?.free_energy,
    };
    Ok(GroundStateRun {
        field: gs.field,
        summary,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DispersionRow {
    pub lambda: f64,
    pub mode: i64,
    pub k: f64,
    pub re_omega: f64,
    pub im_omega: f64,
    pub analytic_re_omega: f64,
    pub analytic_im_omega: f64,
    /// Imaginary part of the small-λ sound-wave formula, for comparison only.
    pub small_lambda_im_omega: f64,
    pub residual: f64,
}

pub const DISPERSION_HEADER: &str =
    "lambda,m,k,re_omega,im_omega,analytic_re_omega,analytic_im_omega,small_lambda_im_omega,residual";

impl DispersionRow {
    pub fn csv(&self) -> String {
        format!(
            "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.lambda,
            self.mode,
            self.k,
            self.re_omega,
            self.im_omega,
            self.analytic_re_omega,
            self.analytic_im_omega,
            self.small_lambda_im_omega,
            self.residual
        )
    }

    /// `|ω_fit − ω_analytic| / |ω_analytic|`.
    pub fn relative_error(&self) -> f64 {
        let dr = self.re_omega - self.analytic_re_omega;
        let di = self.im_omega - self.analytic_im_omega;
        (dr * dr + di * di).sqrt() / self.analytic_re_omega.hypot(self.analytic_im_omega)
    }
}

pub fn worker_count(jobs: usize) -> usize {
    std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs)
        .max(1)
}

/// Runs `job(i)` for `i in 0..n` on a small thread pool, returning results in order.
pub fn fan_out<T: Send>(n: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..worker_count(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = job(i);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

pub fn run_dispersion(cfg: &RunConfig) -> Result<Vec<DispersionRow>> {
    if cfg.physics.potential.is_some() {
        return Err(cfg.error("physics", "potential", "dispersion is measured around the uniform state; remove the potential"));
    }
    let d = &cfg.dispersion;
    let dt = match &cfg.integration {
        Some(i) if i.dt_setting != "auto" => Some(i.dt),
        _ => None,
    };
    let dc = DispersionConfig {
        n_points: cfg.grid.n_points,
        length: cfg.grid.length,
        amplitude: d.amplitude,
        dt,
        periods: d.periods,
        samples: d.samples,
    };
    let n0 = 1.0 / cfg.grid.length;
    let g_n0 = cfg.physics.coupling * n0;
    let jobs: Vec<(f64, i64)> = d
        .lambdas
        .iter()
        .flat_map(|&l| d.modes.iter().map(move |&m| (l, m)))
        .collect();
    let results = fan_out(jobs.len(), |i| -> metagpe::Result<(DispersionRow, Option<GpeError>)> {
        let (lambda, m) = jobs[i];
        let p = ModelParams::new(cfg.physics.coupling, cfg.physics.mu, lambda)?;
        let grid = cfg.grid();
        let k = grid.wavenumber(m);
        let analytic = analytic_dispersion(k, &p, n0).omega;
        let row = DispersionRow {
            lambda,
            mode: m,
            k,
            re_omega: f64::NAN,
            im_omega: f64::NAN,
            analytic_re_omega: analytic.re,
            analytic_im_omega: analytic.im,
            small_lambda_im_omega: sound_wave_approximation(k, g_n0, lambda).im,
            residual: f64::NAN,
        };
        match measure_dispersion(m, &p, &dc) {
            Ok(meas) => Ok((
                DispersionRow {
                    re_omega: meas.point.omega.re,
                    im_omega: meas.point.omega.im,
                    residual: meas.relative_residual,
                    ..row
                },
                None,
            )),
            Err(e @ GpeError::FitFailure { .. }) => Ok((
                DispersionRow {
                    residual: match &e {
                        GpeError::FitFailure { relative_residual, .. } => *relative_residual,
                        _ => unreachable!(),
                    },
                    ..row
                },
                Some(e),
            )),
            Err(e) => Err(e),
        }
    });
    let dir = &cfg.output.directory;
    ensure_dir(dir)?;
    let mut rows = Vec::new();
    let mut failure = None;
    for r in results {
        let (row, fail) = r?;
        rows.push(row);
        if failure.is_none() {
            failure = fail;
        }
    }
    let mut w = CsvWriter::create(&dir.join("dispersion.csv"), DISPERSION_HEADER)?;
    for row in &rows {
        w.row(&row.csv())?;
    }
    w.finish()?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(rows),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuenchSeed {
    pub seed: u64,
    /// Index of the first stage with λ > 0.
    pub dissipation_stage: usize,
    pub occ_at_stage_start: f64,
    pub occ_at_stage_end: f64,
    pub occ_final: f64,
    /// Mean occupation over the trailing half of the preceding stage, if it has enough records.
    pub occ_pre_stage_mean: Option<f64>,
    pub thermalized: Option<bool>,
    pub free_energy_start: f64,
    pub free_energy_end: f64,
    /// F never rose (beyond 1e−10 relative) between records inside the stage.
    pub free_energy_monotone: bool,
    pub max_relative_norm_change: f64,
    #[serde(skip)]
    pub records: Vec<ObservableRecord>,
}

impl QuenchSeed {
    /// Pre-stage occupation: the preceding-stage mean when available.
    pub fn occ_pre(&self) -> f64 {
        self.occ_pre_stage_mean.unwrap_or(self.occ_at_stage_start)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuenchSummary {
    pub seeds: Vec<QuenchSeed>,
    pub median_pre: f64,
    pub median_post: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_quench(cfg: &RunConfig) -> Result<QuenchSummary> {
    if !matches!(cfg.initial()?, InitialConfig::Thermal { .. }) {
        return Err(cfg.error("initial", "kind", "the quench command needs kind = \"thermal\""));
    }
    let stages = cfg.stages();
    let Some(dis) = stages.iter().position(|s| s.lambda > 0.0) else {
        return Err(cfg.error("physics", "stages", "no stage with lambda > 0"));
    };
    let p = model_params(cfg)?;
    let seeds = cfg.quench.seeds.clone();
    let results = fan_out(seeds.len(), |i| -> Result<QuenchSeed> {
        let seed = seeds[i];
        let mut spec = cfg.thermal_spec().expect("thermal");
        spec.seed = seed;
        let psi0 = thermal_sample(&cfg.grid(), &p, &spec)?;
        let dir = cfg.output.directory.join(format!("seed_{seed}"));
        let info = InitialInfo {
            kind: "thermal".into(),
            ..Default::default()
        };
        let traj = run_trajectory(cfg, psi0, p.clone(), info, &dir, false)?;
        quench_seed(cfg, seed, dis, traj)
    });
    let seeds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let dir = &cfg.output.directory;
    let mut w = CsvWriter::create(
        &dir.join("quench_summary.csv"),
        "seed,occ_pre,occ_at_stage_start,occ_at_stage_end,occ_final,free_energy_start,free_energy_end,free_energy_monotone,thermalized",
    )?;
    for s in &seeds {
        w.row(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            s.seed,
            s.occ_pre(),
            s.occ_at_stage_start,
            s.occ_at_stage_end,
            s.occ_final,
            s.free_energy_start,
            s.free_energy_end,
            s.free_energy_monotone,
            s.thermalized.map_or("n/a".to_string(), |b| b.to_string())
        ))?;
    }
    w.finish()?;
    let pre: Vec<f64> = seeds.iter().map(QuenchSeed::occ_pre).collect();
    let post: Vec<f64> = seeds.iter().map(|s| s.occ_at_stage_end).collect();
    Ok(QuenchSummary {
        median_pre: median(&pre),
        median_post: median(&post),
        seeds,
    })
}

fn quench_seed(cfg: &RunConfig, seed: u64, dis: usize, traj: Trajectory) -> Result<QuenchSeed> {
    let at_end = |stage: usize| -> Result<ObservableRecord> {
        let (_, t, f) = traj
            .sink
            .stage_ends
            .iter()
            .find(|(s, _, _)| *s == stage)
            .expect("every stage finishes");
        Ok(observables(f, &traj.params.with_lambda(cfg.physics.stages[stage].lambda), *t)?)
    };
    let start = if dis == 0 {
        observables(&traj.initial, &traj.params.with_lambda(cfg.physics.stages[0].lambda), 0.0)?
    } else {
        at_end(dis - 1)?
    };
    let end = at_end(dis)?;
    let last = traj.sink.stage_ends.len() - 1;
    let fin = at_end(last)?;
    let t0: f64 = cfg.physics.stages[..dis].iter().map(|s| s.duration).sum();
    let t1 = t0 + cfg.physics.stages[dis].duration;
    let slack = 1e-9 * cfg.physics.stages[dis].duration;
    let inside: Vec<&ObservableRecord> = traj
        .sink
        .records
        .iter()
        .filter(|r| r.t >= t0 - slack && r.t <= t1 + slack)
        .collect();
    let free_energy_monotone = inside
        .windows(2)
        .all(|w| w[1].free_energy <= w[0].free_energy + 1e-10 * w[0].free_energy.abs())
        && end.free_energy < start.free_energy;
    let (occ_pre_stage_mean, thermalized) = if dis == 0 {
        (None, None)
    } else {
        let t_prev: f64 = cfg.physics.stages[..dis - 1].iter().map(|s| s.duration).sum();
        let prev: Vec<ObservableRecord> = traj
            .sink
            .records
            .iter()
            .filter(|r| r.t >= t_prev - slack && r.t <= t0 + slack)
            .copied()
            .collect();
        match thermalization_check(&prev) {
            Ok(rep) => (Some(rep.mean), Some(rep.stationary)),
            Err(_) => (None, None),
        }
    };
    Ok(QuenchSeed {
        seed,
        dissipation_stage: dis,
        occ_at_stage_start: start.ground_mode_occ,
        occ_at_stage_end: end.ground_mode_occ,
        occ_final: fin.ground_mode_occ,
        occ_pre_stage_mean,
        thermalized,
        free_energy_start: start.free_energy,
        free_energy_end: end.free_energy,
        free_energy_monotone,
        max_relative_norm_change: traj.summary.max_relative_norm_change,
        records: traj.sink.records,
    })
}
