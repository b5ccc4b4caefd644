//! Time evolution: right-hand sides of the conservative, Pitaevskii-damped and
//! metriplectic equations, a fixed-step RK4 integrator, piecewise-constant
//! dissipation schedules and the projected-gradient ground-state solver.

use num_complex::Complex64;

use crate::error::{GpeError, Result};
use crate::grid::{ComplexField, Grid1D};
use crate::model::{
    free_energy, gp_operator_into, observables, project_q_in_place, ModelParams, ModelWorkspace,
    ObservableRecord,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DynamicsKind {
    /// `∂ₜψ = −iη`.
    Conservative,
    /// `∂ₜψ = −(i + λ)η`; dissipates both F and N.
    Pitaevskii,
    /// `∂ₜψ = −iη − λQη`; dissipates F on the surface of constant N.
    Metriplectic,
}

impl DynamicsKind {
    pub fn name(self) -> &'static str {
        match self {
            DynamicsKind::Conservative => "conservative",
            DynamicsKind::Pitaevskii => "pitaevskii",
            DynamicsKind::Metriplectic => "metriplectic",
        }
    }
}

impl std::str::FromStr for DynamicsKind {
    type Err = GpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(DynamicsKind::Conservative),
            "pitaevskii" => Ok(DynamicsKind::Pitaevskii),
            "metriplectic" => Ok(DynamicsKind::Metriplectic),
            other => Err(GpeError::InvalidParameter(format!(
                "unknown dynamics kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage {
    pub duration: f64,
    pub lambda: f64,
}

/// Ordered list of constant-λ stages; λ jumps discontinuously between stages.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSchedule {
    stages: Vec<Stage>,
}

impl LambdaSchedule {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(GpeError::InvalidParameter("schedule has no stages".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(GpeError::InvalidParameter(format!(
                    "stage {i}: duration must be positive and finite, got {}",
                    s.duration
                )));
            }
            if !(s.lambda.is_finite() && s.lambda >= 0.0) {
                return Err(GpeError::InvalidParameter(format!(
                    "stage {i}: lambda must be finite and >= 0, got {}",
                    s.lambda
                )));
            }
        }
        Ok(Self { stages })
    }

    pub fn constant(duration: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![Stage { duration, lambda }])
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Number of RK4 steps each stage takes with a nominal step `dt`; the
    /// stage step is shrunk so the duration is hit exactly.
    pub fn steps_per_stage(&self, dt: f64) -> Vec<u64> {
        self.stages
            .iter()
            .map(|s| ((s.duration / dt) - 1e-9).ceil().max(1.0) as u64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub snapshot_stride: u64,
    pub observable_stride: u64,
    /// Rescale to the initial norm after every step.
    pub renormalize: bool,
}

impl EvolutionConfig {
    pub fn new(dt: f64, snapshot_stride: u64, observable_stride: u64) -> Self {
        Self {
            dt,
            snapshot_stride,
            observable_stride,
            renormalize: false,
        }
    }
}

/// Outcome of checking a step size against the RK4 stability bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStepCheck {
    Ok,
    /// Above half the bound: runs, but close to the edge.
    NearBound { dt: f64, bound: f64 },
}

pub fn check_time_step(grid: &Grid1D, dt: f64) -> Result<TimeStepCheck> {
    let bound = grid.rk4_stability_bound();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GpeError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if dt > bound {
        return Err(GpeError::StabilityBound { dt, bound });
    }
    if dt > 0.5 * bound {
        return Ok(TimeStepCheck::NearBound { dt, bound });
    }
    Ok(TimeStepCheck::Ok)
}

/// Default step: 0.4 of the RK4 stability bound.
pub fn auto_time_step(grid: &Grid1D) -> f64 {
    0.4 * grid.rk4_stability_bound()
}

/// Right-hand-side evaluator and RK4 integrator with preallocated buffers.
pub struct Stepper {
    grid: Grid1D,
    model_ws: ModelWorkspace,
    eta: Vec<Complex64>,
    k: [Vec<Complex64>; 4],
    stage_state: Vec<Complex64>,
    step_count: u64,
    time: f64,
}

impl Stepper {
    pub fn new(grid: &Grid1D) -> Self {
        let n = grid.n_points();
        Self {
            grid: grid.clone(),
            model_ws: ModelWorkspace::new(grid),
            eta: vec![ZERO; n],
            k: std::array::from_fn(|_| vec![ZERO; n]),
            stage_state: vec![ZERO; n],
            step_count: 0,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn rhs_into(
        grid: &Grid1D,
        ws: &mut ModelWorkspace,
        eta: &mut [Complex64],
        psi: &[Complex64],
        p: &ModelParams,
        kind: DynamicsKind,
        out: &mut [Complex64],
    ) -> Result<()> {
        let kind = match kind {
            // λ = 0 runs the conservative path verbatim.
            DynamicsKind::Metriplectic | DynamicsKind::Pitaevskii if p.lambda == 0.0 => {
                DynamicsKind::Conservative
            }
            k => k,
        };
        match kind {
            DynamicsKind::Conservative => {
                gp_operator_into(grid, psi, p, out, ws);
                out.iter_mut().for_each(|z| *z *= MINUS_I);
            }
            DynamicsKind::Pitaevskii => {
                gp_operator_into(grid, psi, p, out, ws);
                let factor = Complex64::new(-p.lambda, -1.0);
                out.iter_mut().for_each(|z| *z *= factor);
            }
            DynamicsKind::Metriplectic => {
                let norm_sq = grid.norm_sq_of(psi);
                if !(norm_sq > 0.0) {
                    return Err(GpeError::DegenerateState(
                        "metriplectic dynamics of a zero field".into(),
                    ));
                }
                gp_operator_into(grid, psi, p, eta, ws);
                out.copy_from_slice(eta);
                project_q_in_place(grid, psi, norm_sq, out);
                for (o, e) in out.iter_mut().zip(eta.iter()) {
                    *o = e * MINUS_I - *o * p.lambda;
                }
            }
        }
        Ok(())
    }

    /// Evaluates `∂ₜψ` for `psi`.
    pub fn rhs(
        &mut self,
        psi: &[Complex64],
        p: &ModelParams,
        kind: DynamicsKind,
    ) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; psi.len()];
        Self::rhs_into(
            &self.grid,
            &mut self.model_ws,
            &mut self.eta,
            psi,
            p,
            kind,
            &mut out,
        )?;
        Ok(out)
    }

    /// Sets the step counter and clock used in divergence reports.
    pub fn set_clock(&mut self, step: u64, time: f64) {
        self.step_count = step;
        self.time = time;
    }

    /// One classical RK4 step of size `dt`, in place.
    pub fn step(
        &mut self,
        psi: &mut [Complex64],
        p: &ModelParams,
        kind: DynamicsKind,
        dt: f64,
    ) -> Result<()> {
        let weights = [0.5 * dt, 0.5 * dt, dt];
        for stage in 0..4 {
            if stage > 0 {
                let w = weights[stage - 1];
                let prev = &self.k[stage - 1];
                for ((s, z), d) in self.stage_state.iter_mut().zip(psi.iter()).zip(prev) {
                    *s = z + d * w;
                }
            }
            let input: &[Complex64] = if stage == 0 { psi } else { &self.stage_state };
            let out = &mut self.k[stage];
            Self::rhs_into(&self.grid, &mut self.model_ws, &mut self.eta, input, p, kind, out)?;
            if !out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(GpeError::Divergence {
                    step: self.step_count,
                    stage: stage + 1,
                    time: self.time,
                });
            }
        }
        let c = dt / 6.0;
        let [k1, k2, k3, k4] = &self.k;
        for (i, z) in psi.iter_mut().enumerate() {
            *z += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * c;
        }
        self.step_count += 1;
        self.time += dt;
        Ok(())
    }
}

/// `∂ₜψ` for the given dynamics.
pub fn rhs(psi: &ComplexField, p: &ModelParams, kind: DynamicsKind) -> Result<ComplexField> {
    p.check_grid(psi.grid())?;
    let mut stepper = Stepper::new(psi.grid());
    let out = stepper.rhs(psi.values(), p, kind)?;
    Ok(ComplexField::from_parts(psi.grid().clone(), out))
}

/// A single RK4 step.
pub fn step_rk4(
    psi: &ComplexField,
    p: &ModelParams,
    kind: DynamicsKind,
    dt: f64,
) -> Result<ComplexField> {
    p.check_grid(psi.grid())?;
    check_time_step(psi.grid(), dt)?;
    let mut stepper = Stepper::new(psi.grid());
    let mut values = psi.values().to_vec();
    stepper.step(&mut values, p, kind, dt)?;
    Ok(ComplexField::from_parts(psi.grid().clone(), values))
}

/// Receives diagnostics from [`evolve`], one producer per trajectory.
pub trait EvolutionSink {
    fn record(&mut self, record: &ObservableRecord) -> Result<()>;

    fn snapshot(&mut self, field: &ComplexField, t: f64, lambda: f64) -> Result<()>;

    /// Called with the field at the end of each schedule stage.
    fn stage_finished(&mut self, _stage: usize, _field: &ComplexField, _t: f64) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl EvolutionSink for NullSink {
    fn record(&mut self, _record: &ObservableRecord) -> Result<()> {
        Ok(())
    }

    fn snapshot(&mut self, _field: &ComplexField, _t: f64, _lambda: f64) -> Result<()> {
        Ok(())
    }
}

/// Keeps records and snapshots in memory.
#[derive(Default)]
pub struct Recorder {
    pub records: Vec<ObservableRecord>,
    /// `(t, λ, field)` for every snapshot.
    pub snapshots: Vec<(f64, f64, ComplexField)>,
    /// `(stage index, t, field)` at each stage end.
    pub stage_ends: Vec<(usize, f64, ComplexField)>,
    pub keep_snapshots: bool,
}

impl Recorder {
    pub fn new() -> Self {
        Self {
            keep_snapshots: true,
            ..Default::default()
        }
    }

    pub fn records_only() -> Self {
        Self::default()
    }
}

impl EvolutionSink for Recorder {
    fn record(&mut self, record: &ObservableRecord) -> Result<()> {
        self.records.push(*record);
        Ok(())
    }

    fn snapshot(&mut self, field: &ComplexField, t: f64, lambda: f64) -> Result<()> {
        if self.keep_snapshots {
            self.snapshots.push((t, lambda, field.clone()));
        }
        Ok(())
    }

    fn stage_finished(&mut self, stage: usize, field: &ComplexField, t: f64) -> Result<()> {
        self.stage_ends.push((stage, t, field.clone()));
        Ok(())
    }
}

/// Advances `psi0` through every stage of `schedule`, overriding `p.lambda`
/// per stage.
///
/// Records and snapshots are emitted at step 0, at every multiple of their
/// stride (counted over the whole run) and at the final step.
pub fn evolve(
    psi0: &ComplexField,
    p: &ModelParams,
    kind: DynamicsKind,
    schedule: &LambdaSchedule,
    cfg: &EvolutionConfig,
    sink: &mut dyn EvolutionSink,
) -> Result<ComplexField> {
    let grid = psi0.grid().clone();
    p.check_grid(&grid)?;
    if cfg.snapshot_stride == 0 || cfg.observable_stride == 0 {
        return Err(GpeError::InvalidParameter("strides must be positive".into()));
    }
    if let TimeStepCheck::NearBound { dt, bound } = check_time_step(&grid, cfg.dt)? {
        log::warn!("dt = {dt:.3e} is above half the RK4 stability bound {bound:.3e}");
    }
    let steps = schedule.steps_per_stage(cfg.dt);
    let total_steps: u64 = steps.iter().sum();
    let target_norm = psi0.norm_sq();

    let mut stepper = Stepper::new(&grid);
    let mut psi = psi0.values().to_vec();
    let mut t = 0.0;
    let mut step: u64 = 0;
    let first_lambda = schedule.stages()[0].lambda;

    let emit = |sink: &mut dyn EvolutionSink,
                    psi: &[Complex64],
                    params: &ModelParams,
                    t: f64,
                    step: u64,
                    is_last: bool|
     -> Result<()> {
        let want_obs = step % cfg.observable_stride == 0 || is_last;
        let want_snap = step % cfg.snapshot_stride == 0 || is_last;
        if !(want_obs || want_snap) {
            return Ok(());
        }
        let field = ComplexField::from_parts(grid.clone(), psi.to_vec());
        if want_obs {
            sink.record(&observables(&field, params, t)?)?;
        }
        if want_snap {
            sink.snapshot(&field, t, params.lambda)?;
        }
        Ok(())
    };

    emit(sink, &psi, &p.with_lambda(first_lambda), t, 0, total_steps == 0)?;
    for (index, (stage, &n_steps)) in schedule.stages().iter().zip(&steps).enumerate() {
        let params = p.with_lambda(stage.lambda);
        let dt = stage.duration / n_steps as f64;
        let t_start = t;
        for i in 0..n_steps {
            stepper.set_clock(step, t);
            stepper.step(&mut psi, &params, kind, dt)?;
            step += 1;
            t = if i + 1 == n_steps {
                t_start + stage.duration
            } else {
                t_start + (i + 1) as f64 * dt
            };
            if cfg.renormalize {
                let n = grid.norm_sq_of(&psi);
                let s = (target_norm / n).sqrt();
                psi.iter_mut().for_each(|z| *z *= s);
            }
            emit(sink, &psi, &params, t, step, step == total_steps)?;
        }
        sink.stage_finished(
            index,
            &ComplexField::from_parts(grid.clone(), psi.clone()),
            t,
        )?;
    }
    Ok(ComplexField::from_parts(grid, psi))
}

/// Result of [`ground_state_ite`].
#[derive(Clone, Debug)]
pub struct GroundState {
    pub field: ComplexField,
    /// `⟨ψ, η⟩/N` evaluated with μ = 0.
    pub mu: f64,
    pub iterations: usize,
    /// Final `∥Qη∥/∥ψ∥`.
    pub residual: f64,
}

/// Ground state by normalized projected-gradient descent
/// `ψ ← normalize(ψ − τQη)` with backtracking on F.
///
/// `−Qη` is the dissipative direction of the metriplectic flow, so this is
/// its λ → ∞ limit with time rescaled. The step τ is capped by the
/// linear-stability limit of the stiffest mode.
pub fn ground_state_ite(
    psi0: &ComplexField,
    p: &ModelParams,
    tol: f64,
    max_iters: usize,
) -> Result<GroundState> {
    ground_state_ite_observed(psi0, p, tol, max_iters, &mut |_| {})
}

/// One accepted iterate of [`ground_state_ite_observed`].
#[derive(Clone, Copy, Debug)]
pub struct IteStep<'a> {
    pub iteration: usize,
    /// Iterate the step was taken from.
    pub psi: &'a [Complex64],
    /// Accepted update before renormalization, `ψ' − ψ`.
    pub step: &'a [Complex64],
    pub tau: f64,
    /// `∥Qη∥/∥ψ∥` at `psi`.
    pub residual: f64,
}

/// [`ground_state_ite`] reporting every accepted step to `observer`.
pub fn ground_state_ite_observed(
    psi0: &ComplexField,
    p: &ModelParams,
    tol: f64,
    max_iters: usize,
    observer: &mut dyn FnMut(&IteStep<'_>),
) -> Result<GroundState> {
    let grid = psi0.grid().clone();
    p.check_grid(&grid)?;
    if !(tol > 0.0) {
        return Err(GpeError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let target = psi0.norm_sq();
    if !(target > 0.0) {
        return Err(GpeError::DegenerateState("ITE from a zero field".into()));
    }
    let mut ws = ModelWorkspace::new(&grid);
    let n = grid.n_points();
    let mut psi = psi0.values().to_vec();
    let mut direction = vec![ZERO; n];
    let mut trial = vec![ZERO; n];

    let v_span = p
        .potential
        .as_ref()
        .map(|v| v.iter().fold(0.0f64, |m, x| m.max((x - p.mu).abs())))
        .unwrap_or(p.mu.abs());
    let max_density = psi.iter().fold(0.0f64, |m, z| m.max(z.norm_sqr()));
    let stiffness = 0.5 * grid.k_max().powi(2) + v_span + 3.0 * p.coupling * max_density / target;
    let tau_max = 1.9 / stiffness;
    let mut tau = tau_max;

    let energy = |values: &[Complex64]| -> Result<f64> {
        free_energy(&ComplexField::from_parts(grid.clone(), values.to_vec()), p)
    };
    let mut f = energy(&psi)?;
    let mut residual = f64::INFINITY;
    for iter in 0..max_iters {
        gp_operator_into(&grid, &psi, p, &mut direction, &mut ws);
        let norm_sq = grid.norm_sq_of(&psi);
        project_q_in_place(&grid, &psi, norm_sq, &mut direction);
        let grad_sq = grid.norm_sq_of(&direction);
        residual = (grad_sq / norm_sq).sqrt();
        if residual < tol {
            return Ok(finish(grid, psi, p, iter, residual));
        }
        loop {
            for ((t, z), d) in trial.iter_mut().zip(&psi).zip(&direction) {
                *t = z - d * tau;
            }
            let scale = (target / grid.norm_sq_of(&trial)).sqrt();
            trial.iter_mut().for_each(|z| *z *= scale);
            let f_trial = energy(&trial)?;
            let slack = 64.0 * f64::EPSILON * f.abs().max(1.0);
            if f_trial <= f - 1e-4 * tau * grad_sq + slack {
                let step: Vec<Complex64> = direction.iter().map(|d| -d * tau).collect();
                observer(&IteStep {
                    iteration: iter,
                    psi: &psi,
                    step: &step,
                    tau,
                    residual,
                });
                std::mem::swap(&mut psi, &mut trial);
                f = f_trial;
                tau = (tau * 1.25).min(tau_max);
                break;
            }
            tau *= 0.5;
            if tau < 1e-12 * tau_max {
                return Err(GpeError::NonConvergence {
                    iterations: iter,
                    residual,
                });
            }
        }
    }
    Err(GpeError::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

fn finish(
    grid: Grid1D,
    psi: Vec<Complex64>,
    p: &ModelParams,
    iterations: usize,
    residual: f64,
) -> GroundState {
    let mut ws = ModelWorkspace::new(&grid);
    let mut eta = vec![ZERO; psi.len()];
    gp_operator_into(&grid, &psi, &p.with_mu(0.0), &mut eta, &mut ws);
    let mu = grid.dot(&psi, &eta).re / grid.norm_sq_of(&psi);
    GroundState {
        field: ComplexField::from_parts(grid, psi),
        mu,
        iterations,
        residual,
    }
}
