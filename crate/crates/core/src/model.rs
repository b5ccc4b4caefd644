//! Free-energy functional, its functional derivative, the projection kernel
//! and the scalar observables, in box units (ħ = m = 1, lengths in L).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{GpeError, Result};
use crate::grid::{ComplexField, Grid1D};

/// Physical parameters of the model.
///
/// The field is normalized to `∥ψ∥² = 1` and `coupling` carries the particle
/// number (`G = gN`).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub coupling: f64,
    pub potential: Option<Arc<[f64]>>,
    /// Chemical-potential shift μ entering `(V − μ)ψ`.
    pub mu: f64,
    /// Dissipation coefficient λ.
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(coupling: f64, mu: f64, lambda: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(GpeError::InvalidParameter(format!(
                "coupling must be finite and >= 0, got {coupling}"
            )));
        }
        if !mu.is_finite() {
            return Err(GpeError::InvalidParameter(format!("mu must be finite, got {mu}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(GpeError::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            coupling,
            potential: None,
            mu,
            lambda,
        })
    }

    pub fn with_potential(mut self, potential: Vec<f64>) -> Result<Self> {
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(GpeError::InvalidParameter("potential has non-finite values".into()));
        }
        self.potential = Some(potential.into());
        Ok(self)
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self {
            mu,
            ..self.clone()
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub(crate) fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        match &self.potential {
            Some(v) if v.len() != grid.n_points() => Err(GpeError::Shape(format!(
                "potential has {} samples, grid has {}",
                v.len(),
                grid.n_points()
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn local_shift(&self, j: usize) -> f64 {
        match &self.potential {
            Some(v) => v[j] - self.mu,
            None => -self.mu,
        }
    }
}

/// Per-sample scalar diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub norm: f64,
    pub free_energy: f64,
    pub mu_mean: f64,
    pub mu_var: f64,
    /// `−2λ ⟨η|Q|η⟩`, the free-energy decay rate of the metriplectic flow.
    pub dissipation_rate: f64,
    pub ground_mode_occ: f64,
}

/// Reusable buffers for evaluating the GP operator on one grid.
pub(crate) struct ModelWorkspace {
    pub(crate) lap: Vec<Complex64>,
    pub(crate) scratch: Vec<Complex64>,
}

impl ModelWorkspace {
    pub(crate) fn new(grid: &Grid1D) -> Self {
        Self {
            lap: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            scratch: vec![Complex64::new(0.0, 0.0); grid.scratch_len()],
        }
    }
}

/// `out = −½∇²ψ + (V − μ)ψ + G|ψ|²ψ`.
pub(crate) fn gp_operator_into(
    grid: &Grid1D,
    psi: &[Complex64],
    p: &ModelParams,
    out: &mut [Complex64],
    ws: &mut ModelWorkspace,
) {
    grid.laplacian_into(psi, &mut ws.lap, &mut ws.scratch);
    let g = p.coupling;
    for (j, ((o, &z), &l)) in out.iter_mut().zip(psi).zip(&ws.lap).enumerate() {
        let shift = p.local_shift(j) + g * z.norm_sqr();
        *o = -0.5 * l + z * shift;
    }
}

/// `v ← v − ψ ⟨ψ, v⟩ / ∥ψ∥²`; returns `⟨ψ, v⟩`.
pub(crate) fn project_q_in_place(
    grid: &Grid1D,
    psi: &[Complex64],
    norm_sq: f64,
    v: &mut [Complex64],
) -> Complex64 {
    let overlap = grid.dot(psi, v);
    let c = overlap / norm_sq;
    for (x, z) in v.iter_mut().zip(psi) {
        *x -= z * c;
    }
    overlap
}

/// Free energy `F = ∫ ½|∇ψ|² + (V − μ)|ψ|² + ½G|ψ|⁴ dx`.
pub fn free_energy(psi: &ComplexField, p: &ModelParams) -> Result<f64> {
    let grid = psi.grid();
    p.check_grid(grid)?;
    let kinetic: f64 = psi
        .mode_amplitudes()
        .iter()
        .zip(grid.wavenumbers())
        .map(|(a, k)| 0.5 * k * k * a.norm_sqr())
        .sum();
    let local: f64 = psi
        .values()
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let rho = z.norm_sqr();
            p.local_shift(j) * rho + 0.5 * p.coupling * rho * rho
        })
        .sum::<f64>()
        * grid.spacing();
    Ok(kinetic + local)
}

/// `η = δF/δψ* = −½∇²ψ + (V − μ)ψ + G|ψ|²ψ`.
pub fn gp_operator(psi: &ComplexField, p: &ModelParams) -> Result<ComplexField> {
    let grid = psi.grid();
    p.check_grid(grid)?;
    let mut ws = ModelWorkspace::new(grid);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    gp_operator_into(grid, psi.values(), p, &mut out, &mut ws);
    Ok(ComplexField::from_parts(grid.clone(), out))
}

/// Projection onto the complement of ψ: `Qv = v − ψ⟨ψ, v⟩/∥ψ∥²`.
pub fn project_q(psi: &ComplexField, v: &ComplexField) -> Result<ComplexField> {
    psi.check_grid(v)?;
    let n = psi.norm_sq();
    if !(n > 0.0) {
        return Err(GpeError::DegenerateState(
            "projection kernel undefined for a zero field".into(),
        ));
    }
    let mut out = v.values().to_vec();
    project_q_in_place(psi.grid(), psi.values(), n, &mut out);
    Ok(ComplexField::from_parts(psi.grid().clone(), out))
}

/// Particle density `|ψ|²`.
pub fn density(psi: &ComplexField) -> Vec<f64> {
    psi.values().iter().map(|z| z.norm_sqr()).collect()
}

/// Particle current `Im(ψ* ∇ψ)`.
pub fn current(psi: &ComplexField) -> Vec<f64> {
    let grad = psi.gradient();
    psi.values()
        .iter()
        .zip(grad.values())
        .map(|(z, d)| (z.conj() * d).im)
        .collect()
}

/// Stationarity residual `∥Qη∥ / ∥ψ∥` (independent of μ).
pub fn stationarity_residual(psi: &ComplexField, p: &ModelParams) -> Result<f64> {
    let eta = gp_operator(psi, p)?;
    let q_eta = project_q(psi, &eta)?;
    Ok(q_eta.norm() / psi.norm())
}

/// Diagnostics of `psi` at time `t`.
pub fn observables(psi: &ComplexField, p: &ModelParams, t: f64) -> Result<ObservableRecord> {
    let grid = psi.grid();
    p.check_grid(grid)?;
    let norm = psi.norm_sq();
    if !(norm > 0.0) {
        return Err(GpeError::DegenerateState("observables of a zero field".into()));
    }
    let eta = gp_operator(psi, p)?;
    let overlap = psi.inner_product(&eta)?;
    let mu_mean = overlap.re / norm;
    // ∥η − ⟨μ⟩ψ∥²/N = ∥η∥²/N − ⟨μ⟩², evaluated without cancellation.
    let mu_var = grid.norm_sq_of(
        &eta.values()
            .iter()
            .zip(psi.values())
            .map(|(e, z)| e - z * mu_mean)
            .collect::<Vec<_>>(),
    ) / norm;
    let mut q_eta = eta.into_values();
    project_q_in_place(grid, psi.values(), norm, &mut q_eta);
    let dissipation_rate = -2.0 * p.lambda * grid.norm_sq_of(&q_eta);
    let ground = psi.mode_amplitude(0)?;
    Ok(ObservableRecord {
        t,
        norm,
        free_energy: free_energy(psi, p)?,
        mu_mean,
        mu_var,
        dissipation_rate,
        ground_mode_occ: ground.norm_sqr(),
    })
}
